#include <doctest.h>

#include <cmath>

#include "sepcr/oracle_sim.hpp"
#include "sepcr/weights.hpp"
#include "test_support.hpp"

using namespace sepcr;
using sepcr::test::fixture;
using sepcr::test::toy_formulas;

namespace {

double logit(double p) { return std::log(p / (1 - p)); }

// one-subject dataset at a single interval, with outcome fields as given
EventHistoryDataset one_subject(int arm, Outcome c, Outcome d, Outcome y) {
    EventHistoryDataset ds;
    ds.horizon = 0;
    Subject s;
    s.id = "1";
    s.arm = arm;
    IntervalRecord r;
    r.k = 0;
    r.c_next = c;
    r.d_next = d;
    r.y_next = y;
    s.records.push_back(r);
    ds.subjects.push_back(std::move(s));
    return ds;
}

// intercept + arm model with prescribed event probabilities per arm
FittedModel two_point_model(OutcomeRole role, double p_arm0, double p_arm1,
                            const CovariateSchema& schema) {
    FittedModel m;
    m.formula = parse_formula("polyk(0) + A", role, schema);
    m.coefficients = {logit(p_arm0), logit(p_arm1) - logit(p_arm0)};
    m.converged = true;
    return m;
}

}  // namespace

TEST_CASE("censoring weight: ones without censoring, zero when censored") {
    auto ds = one_subject(0, 0, 0, 0);
    NuisanceSet ns;
    ns.d_hazard = two_point_model(OutcomeRole::DHazard, 0.1, 0.2, ds.schema);
    ns.y_hazard = two_point_model(OutcomeRole::YHazard, 0.1, 0.2, ds.schema);
    WeightEngine engine(ds, ns);
    CHECK(engine.w_c(0, 0, 0) == 1.0);  // no censoring model at all

    auto censored = one_subject(1, 1, kMissing, kMissing);
    NuisanceSet ns2;
    ns2.d_hazard = ns.d_hazard;
    ns2.y_hazard = ns.y_hazard;
    ns2.c_hazard = two_point_model(OutcomeRole::CHazard, 0.2, 0.2, censored.schema);
    WeightEngine engine2(censored, ns2);
    CHECK(engine2.w_c(0, 0, 1) == 0.0);

    auto open = one_subject(1, 0, 0, 1);
    WeightEngine engine3(open, ns2);
    CHECK(engine3.w_c(0, 0, 1) == doctest::Approx(1.0 / 0.8).epsilon(1e-12));
}

TEST_CASE("competing-event weight arithmetic") {
    auto ds = one_subject(1, 0, 0, 1);
    NuisanceSet ns;
    // survival 0.9 under arm 0 (the a_D argument below) and 0.8 under arm 1
    ns.d_hazard = two_point_model(OutcomeRole::DHazard, 0.1, 0.2, ds.schema);
    ns.y_hazard = two_point_model(OutcomeRole::YHazard, 0.1, 0.2, ds.schema);
    WeightEngine engine(ds, ns);
    CHECK(engine.w_d(0, 0, /*ay=*/1, /*ad=*/1) == 1.0);
    CHECK(engine.w_d(0, 0, /*ay=*/1, /*ad=*/0) ==
          doctest::Approx(0.9 / 0.8).epsilon(1e-12));
}

TEST_CASE("event-of-interest weight: single-interval ratio and offsets") {
    auto ds = one_subject(0, 0, 0, 1);
    NuisanceSet ns;
    ns.d_hazard = two_point_model(OutcomeRole::DHazard, 0.1, 0.1, ds.schema);
    // hazard 0.1 under arm 0 and 0.2 under arm 1
    ns.y_hazard = two_point_model(OutcomeRole::YHazard, 0.1, 0.2, ds.schema);
    WeightEngine engine(ds, ns);
    CHECK(engine.w_y(0, 0, /*ad=*/0, /*ay=*/0) == 1.0);
    CHECK(engine.w_y(0, 0, /*ad=*/0, /*ay=*/1) == doctest::Approx(2.0).epsilon(1e-12));

    // zero offset leaves the weight untouched
    SensitivityFunction zero = [](int, std::span<const IntervalRecord>, int) { return 0.0; };
    CHECK(engine.w_y_dagger(0, 0, 0, 1, zero) == engine.w_y(0, 0, 0, 1));

    // shifting the numerator hazard from 0.2 to 0.25 against denominator 0.1:
    // the cross-world target has a_D = 0, so the shift enters with +t
    SensitivityFunction t05 = [](int, std::span<const IntervalRecord>, int) { return 0.05; };
    CHECK(engine.w_y_dagger(0, 0, /*ad=*/0, /*ay=*/1, t05) ==
          doctest::Approx(0.25 / 0.1).epsilon(1e-12));

    SensitivityFunction huge = [](int, std::span<const IntervalRecord>, int) { return 0.9; };
    CHECK_THROWS_AS(engine.w_y_dagger(0, 0, 0, 1, huge), OffsetOutOfRange);
}

TEST_CASE("covariate-block weights collapse when a block is empty") {
    const DgpSpec dgp = load_dgp(fixture("dgps/toy_two_period.dgp"));
    const auto ds = simulate(dgp, 3000, 21);

    // everything on the A_Y side: the A_D-block weight is identically one
    NuisanceFormulas f = toy_formulas(false);
    f.partition.lad_block = {};
    const NuisanceSet ns = fit_nuisances(ds, f);
    WeightEngine engine(ds, ns);
    for (std::size_t i = 0; i < 20; ++i) {
        CHECK(engine.w_lad(i, 0, 1, 0) == 1.0);
        CHECK(engine.w_lad(i, 0, 0, 1) == 1.0);
    }

    // everything on the A_D side: the A_Y-block weight is identically one
    NuisanceFormulas g = toy_formulas(false);
    const NuisanceSet ns2 = fit_nuisances(ds, g);
    WeightEngine engine2(ds, ns2);
    for (std::size_t i = 0; i < 20; ++i) {
        CHECK(engine2.w_lay(i, 0, 1, 0) == 1.0);
        if (ds.subjects[i].records.size() > 1) CHECK(engine2.w_lay(i, 1, 0, 1) == 1.0);
    }
}

TEST_CASE("same-arm degeneracy is exact for every family") {
    const DgpSpec dgp = load_dgp(fixture("dgps/toy_two_period_censored.dgp"));
    const auto ds = simulate(dgp, 3000, 22);
    const NuisanceSet ns = fit_nuisances(ds, toy_formulas(true));
    WeightEngine engine(ds, ns);
    for (std::size_t i = 0; i < 40; ++i) {
        const auto& recs = ds.subjects[i].records;
        for (int s = 0; s < static_cast<int>(recs.size()); ++s)
            for (int a = 0; a <= 1; ++a) {
                CHECK(engine.w_d(i, s, a, a) == 1.0);
                CHECK(engine.w_y(i, s, a, a) == 1.0);
                CHECK(engine.w_lad(i, s, a, a) == 1.0);
                CHECK(engine.w_lay(i, s, a, a) == 1.0);
            }
    }
}

TEST_CASE("cumulative weights match a direct evaluation of their definitions") {
    const DgpSpec dgp = load_dgp(fixture("dgps/toy_two_period_censored.dgp"));
    const auto ds = exact_dataset(dgp, 1 << 14);
    FitOptions tight;
    tight.tolerance = 1e-10;
    const NuisanceSet ns = fit_nuisances(ds, toy_formulas(true), tight);
    WeightEngine engine(ds, ns);

    const int ay = 1, ad = 0;
    for (std::size_t i = 0; i < ds.subjects.size(); i += 997) {
        const auto& recs = ds.subjects[i].records;
        for (int s = 0; s < static_cast<int>(recs.size()); ++s) {
            // direct product over intervals from the fitted conditionals
            double wc_denom = 1, wd = 1, wy_surv = 1;
            for (int j = 0; j <= s; ++j) {
                const RecordRef ref{i, static_cast<std::size_t>(j)};
                wc_denom *= 1.0 - predict_prob(*ns.c_hazard, ds.schema,
                                               context_for(ds, ref, ds.subjects[i].arm));
                wd *= (1.0 - predict_prob(ns.d_hazard, ds.schema, context_for(ds, ref, ad))) /
                      (1.0 - predict_prob(ns.d_hazard, ds.schema, context_for(ds, ref, ay)));
                if (j < s)
                    wy_surv *=
                        (1.0 - predict_prob(ns.y_hazard, ds.schema, context_for(ds, ref, ay))) /
                        (1.0 - predict_prob(ns.y_hazard, ds.schema, context_for(ds, ref, ad)));
            }
            const RecordRef at_s{i, static_cast<std::size_t>(s)};
            const double wy =
                wy_surv *
                predict_prob(ns.y_hazard, ds.schema, context_for(ds, at_s, ay)) /
                predict_prob(ns.y_hazard, ds.schema, context_for(ds, at_s, ad));
            bool censored = false;
            for (int j = 0; j <= s; ++j) censored |= recs[static_cast<std::size_t>(j)].c_next == 1;
            const double wc = censored ? 0.0 : 1.0 / wc_denom;

            CHECK(engine.w_c(i, s, ds.subjects[i].arm) ==
                  doctest::Approx(wc).epsilon(1e-12));
            CHECK(engine.w_d(i, s, ay, ad) == doctest::Approx(wd).epsilon(1e-12));
            CHECK(engine.w_y(i, s, ad, ay) == doctest::Approx(wy).epsilon(1e-12));
        }
    }
}

TEST_CASE("block weight equals the covariate-density form on an exact-law sample") {
    // treatment-model odds against the direct density ratio, both from
    // saturated fits on a dataset reproducing the law exactly
    const DgpSpec dgp = load_dgp(fixture("dgps/toy_two_period.dgp"));
    const auto ds = exact_dataset(dgp, 1 << 15);
    FitOptions tight;
    tight.tolerance = 1e-10;
    const NuisanceSet ns = fit_nuisances(ds, toy_formulas(false), tight);
    WeightEngine engine(ds, ns);

    // empirical covariate densities by arm and interval-1 value
    double n_arm[2] = {0, 0}, n_l1[2] = {0, 0};
    for (const auto& s : ds.subjects) {
        if (s.records.size() < 2) continue;
        n_arm[s.arm] += 1;
        if (s.records[1].l[0] == 1.0) n_l1[s.arm] += 1;
    }
    const double f_l1[2] = {n_l1[0] / n_arm[0], n_l1[1] / n_arm[1]};

    const int ay = 1, ad = 0;
    for (std::size_t i = 0; i < ds.subjects.size(); i += 1231) {
        if (ds.subjects[i].records.size() < 2) continue;
        const int l1 = static_cast<int>(ds.subjects[i].records[1].l[0]);
        const double dens_ad = l1 == 1 ? f_l1[ad] : 1 - f_l1[ad];
        const double dens_ay = l1 == 1 ? f_l1[ay] : 1 - f_l1[ay];
        // interval 0 contributes nothing (the covariate is degenerate there)
        CHECK(engine.w_lad(i, 1, ay, ad) ==
              doctest::Approx(dens_ad / dens_ay).epsilon(1e-7));
    }
}

TEST_CASE("weighted at-risk mass recovers the censoring-free law") {
    const DgpSpec dgp = load_dgp(fixture("dgps/toy_two_period_censored.dgp"));
    const std::size_t n = 60000;
    const auto ds = simulate(dgp, n, 31);
    const NuisanceSet ns = fit_nuisances(ds, toy_formulas(true));
    WeightEngine engine(ds, ns);

    for (int arm = 0; arm <= 1; ++arm) {
        // the censoring-free probability of being alive and event-free
        // through interval 1, from enumeration
        const auto law = measured_regime_law(dgp, {arm, arm, arm}, /*with_censoring=*/false);
        double p_alive = 0;
        for (const auto& [key, agg] : law.at[1]) p_alive += agg.mass;

        double weighted = 0, n_arm = 0, n_risk0 = 0;
        double mean_w0 = 0;
        for (std::size_t i = 0; i < ds.subjects.size(); ++i) {
            const auto& s = ds.subjects[i];
            if (s.arm != arm) continue;
            n_arm += 1;
            if (!s.records.empty()) {
                mean_w0 += engine.w_c(i, 0, arm);
                n_risk0 += 1;
            }
            if (s.records.size() > 1) weighted += engine.w_c(i, 0, arm);
        }
        // at the first interval the weighted mean is one by construction
        const double se0 = 1.0 / std::sqrt(n_risk0);
        CHECK(std::fabs(mean_w0 / n_risk0 - 1.0) < 4 * se0);
        // weighted survivors estimate the censoring-eliminated at-risk mass
        const double se = 1.5 / std::sqrt(n_arm);
        CHECK(std::fabs(weighted / n_arm - p_alive) < 4 * se);
    }
}

TEST_CASE("traces are prefix-multiplicative and export cleanly") {
    const DgpSpec dgp = load_dgp(fixture("dgps/toy_two_period_censored.dgp"));
    const auto ds = simulate(dgp, 500, 17);
    const NuisanceSet ns = fit_nuisances(ds, toy_formulas(true));
    WeightEngine engine(ds, ns);

    for (std::size_t i = 0; i < ds.subjects.size(); i += 29) {
        const auto tr = weight_trace(engine, i, 1, 0);
        for (std::size_t s = 0; s + 1 < tr.w_d.size(); ++s) {
            if (tr.w_c[s + 1] == 0.0) continue;  // censored afterwards
            // the step ratio equals the interval factor recomputed directly
            const RecordRef ref{i, s + 1};
            const double step =
                (1.0 - predict_prob(ns.d_hazard, ds.schema, context_for(ds, ref, 0))) /
                (1.0 - predict_prob(ns.d_hazard, ds.schema, context_for(ds, ref, 1)));
            CHECK(tr.w_d[s + 1] == doctest::Approx(tr.w_d[s] * step).epsilon(1e-12));
            CHECK(tr.product_nu1[s] ==
                  doctest::Approx(tr.w_c[s] * tr.w_d[s] * tr.w_lad[s]).epsilon(1e-12));
        }
    }
    const std::string csv = weight_traces_csv(engine, 1, 0, /*product_nu1=*/true);
    CHECK(csv.rfind("id,s,w_c,w_d,w_lad,w_y,w_lay,product\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') ==
          static_cast<long>(ds.n_records()) + 1);
}

TEST_CASE("positivity guard trips on tiny denominators") {
    auto ds = one_subject(1, 0, 0, 1);
    NuisanceSet ns;
    ns.d_hazard = two_point_model(OutcomeRole::DHazard, 0.1, 1.0 - 1e-9, ds.schema);
    ns.y_hazard = two_point_model(OutcomeRole::YHazard, 0.1, 0.2, ds.schema);
    WeightEngine engine(ds, ns);
    // the denominator survival under a_Y = 1 is about 1e-9
    CHECK_THROWS_AS(engine.w_d(0, 0, /*ay=*/1, /*ad=*/0), PositivityBreach);
}

TEST_CASE("nuisance fitting verifies the partition and congeniality nesting") {
    const DgpSpec dgp = load_dgp(fixture("dgps/toy_two_period.dgp"));
    const auto ds = simulate(dgp, 2000, 9);

    NuisanceFormulas bad = toy_formulas(false);
    bad.partition.lad_block = {"nosuch"};
    CHECK_THROWS_AS(fit_nuisances(ds, bad), PartitionMismatch);

    // non-nested treatment models draw a warning, not an error
    NuisanceFormulas warn = toy_formulas(false);
    warn.a_given_past = "polyk(1) + Lk(l)";  // not a subset of the fuller model
    const auto ns = fit_nuisances(ds, warn);
    bool found = false;
    for (const auto& w : ns.warnings) found |= w.find("Congeniality") != std::string::npos;
    CHECK(found);

    // censored data without a censoring model is refused
    const DgpSpec cens = load_dgp(fixture("dgps/toy_two_period_censored.dgp"));
    const auto cds = simulate(cens, 2000, 9);
    CHECK_THROWS_AS(fit_nuisances(cds, toy_formulas(false)), ConfigError);
}
