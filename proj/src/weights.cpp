#include "sepcr/weights.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace sepcr {

bool NuisancePartition::ad_side(const CovariateSpec& spec) const {
    if (spec.timing == CovariateTiming::Baseline) return true;
    return std::find(lad_block.begin(), lad_block.end(), spec.name) != lad_block.end();
}

bool NuisancePartition::ay_block_empty(const CovariateSchema& schema) const {
    for (const auto& e : schema.entries)
        if (e.timing == CovariateTiming::TimeVarying && !ad_side(e)) return false;
    return true;
}

bool NuisancePartition::ad_block_empty(const CovariateSchema& schema) const {
    for (const auto& e : schema.entries)
        if (e.timing == CovariateTiming::TimeVarying && ad_side(e)) return false;
    return true;
}

namespace {

std::set<std::string> term_labels(const ModelFormula& f) {
    std::set<std::string> out;
    for (const auto& t : f.terms) out.insert(t.label());
    return out;
}

// the reduced model's terms must nest inside the richer model's
void congeniality_check(const FittedModel& reduced, const FittedModel& full,
                        const std::string& pair, std::vector<std::string>& warnings) {
    const auto r = term_labels(reduced.formula);
    const auto f = term_labels(full.formula);
    const bool nested = std::includes(f.begin(), f.end(), r.begin(), r.end()) &&
                        reduced.formula.intercept_poly_degree <= full.formula.intercept_poly_degree;
    if (!nested)
        warnings.push_back("CongenialityWarning: " + pair +
                           " treatment models are not nested; their implied laws may conflict");
}

}  // namespace

NuisanceSet fit_nuisances(const EventHistoryDataset& ds, const NuisanceFormulas& formulas,
                          const FitOptions& opts) {
    NuisanceSet ns;
    ns.partition = formulas.partition;
    for (const auto& name : formulas.partition.lad_block) {
        const int idx = ds.schema.index_of(name);
        if (idx < 0) throw PartitionMismatch("partition names unknown covariate " + name);
        if (ds.schema.entries[static_cast<std::size_t>(idx)].timing != CovariateTiming::TimeVarying)
            throw PartitionMismatch("partition lists non-time-varying covariate " + name);
    }

    ns.y_hazard = fit_model(parse_formula(formulas.y_hazard, OutcomeRole::YHazard, ds.schema), ds,
                            opts);
    ns.d_hazard = fit_model(parse_formula(formulas.d_hazard, OutcomeRole::DHazard, ds.schema), ds,
                            opts);

    bool any_censoring = false;
    for (const auto& s : ds.subjects)
        for (const auto& r : s.records) any_censoring |= r.c_next == 1;
    if (formulas.c_hazard && *formulas.c_hazard != "none") {
        ns.c_hazard = fit_model(parse_formula(*formulas.c_hazard, OutcomeRole::CHazard, ds.schema),
                                ds, opts);
    } else if (any_censoring) {
        throw ConfigError("data are censored but no censoring model was given");
    }

    if (formulas.a_given_lad_past)
        ns.a_given_lad_past = fit_model(
            parse_formula(*formulas.a_given_lad_past, OutcomeRole::AModelGivenLAD, ds.schema), ds,
            opts);
    if (formulas.a_given_past)
        ns.a_given_past = fit_model(
            parse_formula(*formulas.a_given_past, OutcomeRole::AModelGivenPast, ds.schema), ds,
            opts);
    if (formulas.a_given_full_l)
        ns.a_given_full_l = fit_model(
            parse_formula(*formulas.a_given_full_l, OutcomeRole::AModelGivenFullL, ds.schema), ds,
            opts);

    if (ns.a_given_past && ns.a_given_lad_past)
        congeniality_check(*ns.a_given_past, *ns.a_given_lad_past, "past / A_D-side", ns.warnings);
    if (ns.a_given_lad_past && ns.a_given_full_l)
        congeniality_check(*ns.a_given_lad_past, *ns.a_given_full_l, "A_D-side / full",
                           ns.warnings);
    return ns;
}

// ---------------------------------------------------------------------------

WeightEngine::WeightEngine(const EventHistoryDataset& ds, const NuisanceSet& ns,
                           WeightOptions opts)
    : ds_(ds), ns_(ns), opts_(opts) {}

const Subject& WeightEngine::subj(std::size_t i) const { return ds_.subjects[i]; }

double WeightEngine::prob(const FittedModel& m, std::size_t subject, std::size_t record,
                          int arm) const {
    return predict_prob(m, ds_.schema, context_for(ds_, RecordRef{subject, record}, arm));
}

double WeightEngine::denom_checked(double p, const char* what) const {
    if (p < opts_.epsilon_pos)
        throw PositivityBreach(std::string(what) + " probability " + format_double(p) +
                               " below epsilon");
    return p;
}

double WeightEngine::w_c(std::size_t subject, int s, int arm) const {
    const auto& records = subj(subject).records;
    if (s < 0 || s > ds_.horizon) throw IndexOutOfRange("w_c: interval out of range");
    if (static_cast<std::size_t>(s) >= records.size()) return 0.0;  // terminated earlier
    for (int j = 0; j <= s; ++j)
        if (records[static_cast<std::size_t>(j)].c_next == 1) return 0.0;
    if (!ns_.c_hazard) return 1.0;
    double denom = 1.0;
    for (int j = 0; j <= s; ++j) {
        const double pc = prob(*ns_.c_hazard, subject, static_cast<std::size_t>(j), arm);
        denom *= denom_checked(1.0 - pc, "censoring survival");
    }
    return 1.0 / denom;
}

double WeightEngine::w_d(std::size_t subject, int s, int ay, int ad) const {
    if (ay == ad) return 1.0;
    const auto& records = subj(subject).records;
    if (s < 0 || static_cast<std::size_t>(s) >= records.size())
        throw IndexOutOfRange("w_d: no record at interval");
    double w = 1.0;
    for (int j = 0; j <= s; ++j) {
        const auto js = static_cast<std::size_t>(j);
        const double num = 1.0 - prob(ns_.d_hazard, subject, js, ad);
        const double den =
            denom_checked(1.0 - prob(ns_.d_hazard, subject, js, ay), "competing-event survival");
        w *= num / den;
    }
    return w;
}

double WeightEngine::w_lad(std::size_t subject, int s, int ay, int ad) const {
    if (ay == ad) return 1.0;
    if (ns_.partition.ad_block_empty(ds_.schema)) return 1.0;
    if (!ns_.a_given_lad_past || !ns_.a_given_past)
        throw ConfigError("A_D-side weight needs the two reduced treatment models");
    const auto& records = subj(subject).records;
    if (s < 0 || static_cast<std::size_t>(s) >= records.size())
        throw IndexOutOfRange("w_lad: no record at interval");
    double w = 1.0;
    for (int j = 0; j <= s; ++j) {
        const auto js = static_cast<std::size_t>(j);
        const double p1_lad = prob(*ns_.a_given_lad_past, subject, js, /*arm=*/0);
        const double p1_past = prob(*ns_.a_given_past, subject, js, /*arm=*/0);
        const double pr_ad_lad = ad == 1 ? p1_lad : 1.0 - p1_lad;
        const double pr_ay_lad = ay == 1 ? p1_lad : 1.0 - p1_lad;
        const double pr_ad_past = ad == 1 ? p1_past : 1.0 - p1_past;
        const double pr_ay_past = ay == 1 ? p1_past : 1.0 - p1_past;
        w *= (pr_ad_lad / denom_checked(pr_ay_lad, "treatment odds")) *
             (pr_ay_past / denom_checked(pr_ad_past, "treatment odds"));
    }
    return w;
}

double WeightEngine::w_lay(std::size_t subject, int s, int ad, int ay) const {
    if (ay == ad) return 1.0;
    if (ns_.partition.ay_block_empty(ds_.schema)) return 1.0;
    if (!ns_.a_given_full_l || !ns_.a_given_lad_past)
        throw ConfigError("A_Y-side weight needs the full and A_D-side treatment models");
    const auto& records = subj(subject).records;
    if (s < 0 || static_cast<std::size_t>(s) >= records.size())
        throw IndexOutOfRange("w_lay: no record at interval");
    double w = 1.0;
    for (int j = 0; j <= s; ++j) {
        const auto js = static_cast<std::size_t>(j);
        const double p1_full = prob(*ns_.a_given_full_l, subject, js, /*arm=*/0);
        const double p1_lad = prob(*ns_.a_given_lad_past, subject, js, /*arm=*/0);
        const double pr_ay_full = ay == 1 ? p1_full : 1.0 - p1_full;
        const double pr_ad_full = ad == 1 ? p1_full : 1.0 - p1_full;
        const double pr_ad_lad = ad == 1 ? p1_lad : 1.0 - p1_lad;
        const double pr_ay_lad = ay == 1 ? p1_lad : 1.0 - p1_lad;
        w *= (pr_ay_full / denom_checked(pr_ad_full, "treatment odds")) *
             (pr_ad_lad / denom_checked(pr_ay_lad, "treatment odds"));
    }
    return w;
}

double WeightEngine::w_y(std::size_t subject, int s, int ad, int ay) const {
    if (ay == ad) return 1.0;
    const auto& records = subj(subject).records;
    if (s < 0 || static_cast<std::size_t>(s) >= records.size())
        throw IndexOutOfRange("w_y: no record at interval");
    const auto ss = static_cast<std::size_t>(s);
    double w = prob(ns_.y_hazard, subject, ss, ay) /
               denom_checked(prob(ns_.y_hazard, subject, ss, ad), "event hazard");
    for (int j = 0; j < s; ++j) {
        const auto js = static_cast<std::size_t>(j);
        const double num = 1.0 - prob(ns_.y_hazard, subject, js, ay);
        const double den =
            denom_checked(1.0 - prob(ns_.y_hazard, subject, js, ad), "event survival");
        w *= num / den;
    }
    return w;
}

double WeightEngine::w_y_dagger(std::size_t subject, int s, int ad, int ay,
                                const SensitivityFunction& t) const {
    if (ay == ad) return 1.0;
    const auto& records = subj(subject).records;
    if (s < 0 || static_cast<std::size_t>(s) >= records.size())
        throw IndexOutOfRange("w_y_dagger: no record at interval");
    // the offset moves the a_Y-arm probabilities to the cross-world regime:
    // the hazard gains (-1)^{a_D} t and the survival the opposite sign
    const double sign_hazard = ad == 0 ? 1.0 : -1.0;
    const auto ss = static_cast<std::size_t>(s);
    auto history = [&](int j) {
        return std::span<const IntervalRecord>(records.data(), static_cast<std::size_t>(j) + 1);
    };
    const double hz =
        prob(ns_.y_hazard, subject, ss, ay) + sign_hazard * t(s, history(s), ay);
    if (!(hz > 0.0 && hz < 1.0))
        throw OffsetOutOfRange("offset-shifted hazard " + format_double(hz) + " outside (0,1)");
    double w = hz / denom_checked(prob(ns_.y_hazard, subject, ss, ad), "event hazard");
    for (int j = 0; j < s; ++j) {
        const auto js = static_cast<std::size_t>(j);
        const double sv =
            (1.0 - prob(ns_.y_hazard, subject, js, ay)) - sign_hazard * t(j, history(j), ay);
        if (!(sv > 0.0 && sv < 1.0))
            throw OffsetOutOfRange("offset-shifted survival " + format_double(sv) +
                                   " outside (0,1)");
        w *= sv / denom_checked(1.0 - prob(ns_.y_hazard, subject, js, ad), "event survival");
    }
    return w;
}

WeightTrace weight_trace(const WeightEngine& engine, std::size_t subject, int ay, int ad) {
    const auto& ds = engine.dataset();
    const auto& records = ds.subjects[subject].records;
    WeightTrace tr;
    tr.subject_id = ds.subjects[subject].id;
    for (std::size_t s = 0; s < records.size(); ++s) {
        const int si = static_cast<int>(s);
        tr.w_c.push_back(engine.w_c(subject, si, ds.subjects[subject].arm));
        tr.w_d.push_back(engine.w_d(subject, si, ay, ad));
        tr.w_lad.push_back(engine.w_lad(subject, si, ay, ad));
        tr.w_y.push_back(engine.w_y(subject, si, ad, ay));
        tr.w_lay.push_back(engine.w_lay(subject, si, ad, ay));
        tr.product_nu1.push_back(tr.w_c.back() * tr.w_d.back() * tr.w_lad.back());
        tr.product_nu2.push_back(tr.w_c.back() * tr.w_y.back() * tr.w_lay.back());
    }
    return tr;
}

std::string weight_traces_csv(const WeightEngine& engine, int ay, int ad, bool product_nu1) {
    std::ostringstream os;
    os << "id,s,w_c,w_d,w_lad,w_y,w_lay,product\n";
    for (std::size_t i = 0; i < engine.dataset().subjects.size(); ++i) {
        const WeightTrace tr = weight_trace(engine, i, ay, ad);
        for (std::size_t s = 0; s < tr.w_c.size(); ++s) {
            os << tr.subject_id << "," << s << "," << format_double(tr.w_c[s]) << ","
               << format_double(tr.w_d[s]) << "," << format_double(tr.w_lad[s]) << ","
               << format_double(tr.w_y[s]) << "," << format_double(tr.w_lay[s]) << ","
               << format_double(product_nu1 ? tr.product_nu1[s] : tr.product_nu2[s]) << "\n";
        }
    }
    return os.str();
}

}  // namespace sepcr
