#include "sepcr/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <thread>

namespace sepcr {

std::string to_string(EstimatorTag t) {
    switch (t) {
        case EstimatorTag::Nu1: return "nu1";
        case EstimatorTag::Nu2: return "nu2";
        case EstimatorTag::Nu2Dagger: return "nu2_dagger";
        case EstimatorTag::GFormula: return "gformula";
        case EstimatorTag::AalenJohansen: return "aalen_johansen";
    }
    return "?";
}

std::string RegimeSpec::to_string() const {
    // semicolon-separated so the whole regime fits in one CSV cell
    std::string s = "ay=" + std::to_string(ay) + ";ad=" + std::to_string(ad);
    if (az) s += ";az=" + std::to_string(*az);
    return s;
}

std::vector<double> RiskCurve::clipped() const {
    std::vector<double> out = values;
    double running = 0.0;
    for (auto& v : out) {
        running = std::max(running, std::min(std::max(v, 0.0), 1.0));
        v = running;
    }
    return out;
}

bool RiskCurve::needs_clipping() const {
    const auto c = clipped();
    for (std::size_t i = 0; i < values.size(); ++i)
        if (c[i] != values[i]) return true;
    return false;
}

// ---------------------------------------------------------------------------
// Saturated empirical conditionals of the identification formula

namespace {

using Key = std::vector<int>;

int int_value(double v) { return static_cast<int>(std::llround(v)); }

// measured covariate values recorded at interval k: everything at k = 0,
// only the time-varying entries afterwards
std::vector<int> interval_values(const CovariateSchema& schema, const IntervalRecord& r, int k) {
    std::vector<int> out;
    for (std::size_t j = 0; j < schema.entries.size(); ++j) {
        if (k > 0 && schema.entries[j].timing == CovariateTiming::Baseline) continue;
        out.push_back(int_value(r.l[j]));
    }
    return out;
}

struct Cell {
    double n = 0, c0 = 0, c0d0 = 0, y1 = 0;
};

struct ArmCounts {
    std::vector<std::map<Key, Cell>> at;                       // per k, by history
    std::vector<std::map<Key, double>> prefix_n;               // at-risk count per prefix
    std::vector<std::map<std::pair<Key, Key>, double>> ad_n;   // (prefix, A_D-side values)
    std::vector<std::map<Key, std::set<Key>>> tails;           // prefix -> interval values
};

struct BlockSplit {
    std::vector<std::vector<bool>> is_ad;  // per interval, per recorded position

    static BlockSplit build(const CovariateSchema& schema, int K,
                            const std::vector<std::string>& lad_block) {
        for (const auto& name : lad_block) {
            const int idx = schema.index_of(name);
            if (idx < 0) throw PartitionMismatch("unknown covariate in the A_D block: " + name);
            if (schema.entries[static_cast<std::size_t>(idx)].timing !=
                CovariateTiming::TimeVarying)
                throw PartitionMismatch("A_D block lists non-time-varying covariate " + name);
        }
        BlockSplit out;
        out.is_ad.resize(static_cast<std::size_t>(K) + 1);
        for (int k = 0; k <= K; ++k) {
            for (const auto& e : schema.entries) {
                if (k > 0 && e.timing == CovariateTiming::Baseline) continue;
                const bool ad =
                    e.timing == CovariateTiming::Baseline ||
                    std::find(lad_block.begin(), lad_block.end(), e.name) != lad_block.end();
                out.is_ad[static_cast<std::size_t>(k)].push_back(ad);
            }
        }
        return out;
    }

    Key ad_part(int k, const Key& tail) const {
        Key out;
        for (std::size_t i = 0; i < tail.size(); ++i)
            if (is_ad[static_cast<std::size_t>(k)][i]) out.push_back(tail[i]);
        return out;
    }
};

ArmCounts count_arm(const EventHistoryDataset& ds, int arm, int K, const BlockSplit& blocks) {
    ArmCounts out;
    out.at.resize(static_cast<std::size_t>(K) + 1);
    out.prefix_n.resize(static_cast<std::size_t>(K) + 1);
    out.ad_n.resize(static_cast<std::size_t>(K) + 1);
    out.tails.resize(static_cast<std::size_t>(K) + 1);
    for (const auto& s : ds.subjects) {
        if (s.arm != arm) continue;
        Key hist;
        for (const auto& r : s.records) {
            if (r.k > K) break;
            const auto ks = static_cast<std::size_t>(r.k);
            const auto tail = interval_values(ds.schema, r, r.k);
            Key key = hist;
            key.insert(key.end(), tail.begin(), tail.end());
            Cell& c = out.at[ks][key];
            c.n += 1;
            if (r.c_next == 0) {
                c.c0 += 1;
                if (r.d_next == 0) {
                    c.c0d0 += 1;
                    if (r.y_next == 1) c.y1 += 1;
                }
            }
            out.prefix_n[ks][hist] += 1;
            out.ad_n[ks][{hist, blocks.ad_part(r.k, tail)}] += 1;
            out.tails[ks][hist].insert(tail);
            hist = std::move(key);
        }
    }
    return out;
}

double lookup(const std::map<Key, double>& m, const Key& k) {
    auto it = m.find(k);
    return it == m.end() ? 0.0 : it->second;
}

double lookup(const std::map<std::pair<Key, Key>, double>& m, const Key& a, const Key& b) {
    auto it = m.find({a, b});
    return it == m.end() ? 0.0 : it->second;
}

const Cell* cell_of(const ArmCounts& ac, int k, const Key& key) {
    const auto& m = ac.at[static_cast<std::size_t>(k)];
    auto it = m.find(key);
    return it == m.end() ? nullptr : &it->second;
}

void require_discrete(const CovariateSchema& schema) {
    if (schema.has_continuous())
        throw ContinuousCovariate(
            "the plug-in identification formula needs discrete covariates");
}

}  // namespace

RiskCurve gformula_plugin(const EventHistoryDataset& ds, int ay, int ad, int K,
                          const GFormulaOptions& opts) {
    require_discrete(ds.schema);
    if (K < 0 || K > ds.horizon) throw IndexOutOfRange("K outside the data horizon");
    if (ds.n_in_arm(ay) == 0 || ds.n_in_arm(ad) == 0)
        throw NoSubjectsInArm("an arm required by the regime is empty");
    const BlockSplit blocks = BlockSplit::build(ds.schema, K, opts.lad_block);
    const ArmCounts arm_y = count_arm(ds, ay, K, blocks);
    const ArmCounts arm_d = count_arm(ds, ad, K, blocks);

    std::vector<double> incr(static_cast<std::size_t>(K) + 1, 0.0);
    std::function<void(int, const Key&, double)> rec = [&](int j, const Key& prefix, double prod) {
        if (j > K || prod == 0.0) return;
        const auto js = static_cast<std::size_t>(j);
        const double nd_prefix = lookup(arm_d.prefix_n[js], prefix);
        if (nd_prefix == 0.0)
            throw EmptyCell("no a_D-arm observations for a history reached at k=" +
                            std::to_string(j));
        std::set<Key> cand;
        if (auto it = arm_y.tails[js].find(prefix); it != arm_y.tails[js].end())
            cand.insert(it->second.begin(), it->second.end());
        if (auto it = arm_d.tails[js].find(prefix); it != arm_d.tails[js].end())
            cand.insert(it->second.begin(), it->second.end());
        for (const auto& tail : cand) {
            const Key adp = blocks.ad_part(j, tail);
            const double f_ad = lookup(arm_d.ad_n[js], prefix, adp) / nd_prefix;
            if (f_ad == 0.0) continue;
            const double ny_ad = lookup(arm_y.ad_n[js], prefix, adp);
            if (ny_ad == 0.0)
                throw EmptyCell("no a_Y-arm observations for an A_D-side value at k=" +
                                std::to_string(j));
            Key key = prefix;
            key.insert(key.end(), tail.begin(), tail.end());
            const Cell* cy = cell_of(arm_y, j, key);
            const double f_ay = (cy ? cy->n : 0.0) / ny_ad;
            if (f_ay == 0.0) continue;
            const Cell* cd = cell_of(arm_d, j, key);
            if (cd == nullptr || cd->c0 == 0.0)
                throw EmptyCell("competing-event conditional empty at k=" + std::to_string(j));
            const double sd = cd->c0d0 / cd->c0;
            if (cy->c0d0 == 0.0)
                throw EmptyCell("event conditional empty at k=" + std::to_string(j));
            const double hy = cy->y1 / cy->c0d0;
            const double here = prod * f_ad * f_ay * sd;
            incr[js] += here * hy;
            if (j < K) rec(j + 1, key, here * (1.0 - hy));
        }
    };
    rec(0, {}, 1.0);

    RiskCurve curve;
    curve.regime = {ay, ad, std::nullopt};
    curve.tag = EstimatorTag::GFormula;
    curve.values.resize(static_cast<std::size_t>(K) + 1);
    double cum = 0.0;
    for (std::size_t i = 0; i < incr.size(); ++i) {
        cum += incr[i];
        curve.values[i] = cum;
    }
    return curve;
}

RiskCurve gformula_three_way(const EventHistoryDataset& ds, int ay, int ad, int az, int K) {
    require_discrete(ds.schema);
    if (K < 0 || K > ds.horizon) throw IndexOutOfRange("K outside the data horizon");
    if (ds.n_in_arm(ay) == 0 || ds.n_in_arm(ad) == 0 || ds.n_in_arm(az) == 0)
        throw NoSubjectsInArm("an arm required by the regime is empty");
    const BlockSplit blocks = BlockSplit::build(ds.schema, K, {});
    const ArmCounts arm_y = count_arm(ds, ay, K, blocks);
    const ArmCounts arm_d = count_arm(ds, ad, K, blocks);
    const ArmCounts arm_z = count_arm(ds, az, K, blocks);

    std::vector<double> incr(static_cast<std::size_t>(K) + 1, 0.0);
    std::function<void(int, const Key&, double)> rec = [&](int j, const Key& prefix, double prod) {
        if (j > K || prod == 0.0) return;
        const auto js = static_cast<std::size_t>(j);
        const double nz_prefix = lookup(arm_z.prefix_n[js], prefix);
        if (nz_prefix == 0.0)
            throw EmptyCell("no a_Z-arm observations for a history reached at k=" +
                            std::to_string(j));
        auto tails_it = arm_z.tails[js].find(prefix);
        if (tails_it == arm_z.tails[js].end()) return;
        for (const auto& tail : tails_it->second) {
            Key key = prefix;
            key.insert(key.end(), tail.begin(), tail.end());
            const Cell* cz = cell_of(arm_z, j, key);
            const double f_l = (cz ? cz->n : 0.0) / nz_prefix;
            if (f_l == 0.0) continue;
            const Cell* cd = cell_of(arm_d, j, key);
            if (cd == nullptr || cd->c0 == 0.0)
                throw EmptyCell("competing-event conditional empty at k=" + std::to_string(j));
            const Cell* cy = cell_of(arm_y, j, key);
            if (cy == nullptr || cy->c0d0 == 0.0)
                throw EmptyCell("event conditional empty at k=" + std::to_string(j));
            const double sd = cd->c0d0 / cd->c0;
            const double hy = cy->y1 / cy->c0d0;
            const double here = prod * f_l * sd;
            incr[js] += here * hy;
            if (j < K) rec(j + 1, key, here * (1.0 - hy));
        }
    };
    rec(0, {}, 1.0);

    RiskCurve curve;
    curve.regime = {ay, ad, az};
    curve.tag = EstimatorTag::GFormula;
    curve.values.resize(static_cast<std::size_t>(K) + 1);
    double cum = 0.0;
    for (std::size_t i = 0; i < incr.size(); ++i) {
        cum += incr[i];
        curve.values[i] = cum;
    }
    return curve;
}

// ---------------------------------------------------------------------------
// Weighted estimators

namespace {

struct Contribution {
    int s;
    double w;
};

RiskCurve assemble_weighted(const EventHistoryDataset& ds, int averaging_arm, int K,
                            std::vector<Contribution> contributions, RegimeSpec regime,
                            EstimatorTag tag, const EstimatorOptions& opts) {
    const double n_arm = static_cast<double>(ds.n_in_arm(averaging_arm));
    if (opts.truncate_percentile) {
        std::vector<double> ws;
        ws.reserve(contributions.size());
        for (const auto& c : contributions) ws.push_back(c.w);
        std::sort(ws.begin(), ws.end());
        if (!ws.empty()) {
            const double q = *opts.truncate_percentile;
            const double pos = q * static_cast<double>(ws.size() - 1);
            const auto lo = static_cast<std::size_t>(std::floor(pos));
            const auto hi = std::min(lo + 1, ws.size() - 1);
            const double cap = ws[lo] + (pos - std::floor(pos)) * (ws[hi] - ws[lo]);
            for (auto& c : contributions) c.w = std::min(c.w, cap);
        }
    }
    std::vector<double> incr(static_cast<std::size_t>(K) + 1, 0.0);
    for (const auto& c : contributions) incr[static_cast<std::size_t>(c.s)] += c.w;
    RiskCurve curve;
    curve.regime = regime;
    curve.tag = tag;
    curve.values.resize(static_cast<std::size_t>(K) + 1);
    double cum = 0.0;
    for (std::size_t i = 0; i < incr.size(); ++i) {
        cum += incr[i];
        curve.values[i] = cum / n_arm;
    }
    return curve;
}

}  // namespace

RiskCurve estimate_nu1(const EventHistoryDataset& ds, const NuisanceSet& ns, int ay, int ad,
                       int K, const EstimatorOptions& opts) {
    if (K < 0 || K > ds.horizon) throw IndexOutOfRange("K outside the data horizon");
    if (ds.n_in_arm(ay) == 0) throw NoSubjectsInArm("no subjects with A=a_Y");
    WeightEngine engine(ds, ns, opts.weights);
    std::vector<Contribution> contributions;
    for (std::size_t i = 0; i < ds.subjects.size(); ++i) {
        const auto& s = ds.subjects[i];
        if (s.arm != ay) continue;
        for (const auto& r : s.records) {
            if (r.k > K) break;
            if (r.c_next == 0 && r.d_next == 0 && r.y_next == 1) {
                const double w = engine.w_c(i, r.k, ay) * engine.w_d(i, r.k, ay, ad) *
                                 engine.w_lad(i, r.k, ay, ad);
                contributions.push_back({r.k, w});
            }
        }
    }
    return assemble_weighted(ds, ay, K, std::move(contributions), {ay, ad, std::nullopt},
                             EstimatorTag::Nu1, opts);
}

RiskCurve estimate_nu2(const EventHistoryDataset& ds, const NuisanceSet& ns, int ay, int ad,
                       int K, const EstimatorOptions& opts) {
    if (K < 0 || K > ds.horizon) throw IndexOutOfRange("K outside the data horizon");
    if (ds.n_in_arm(ad) == 0) throw NoSubjectsInArm("no subjects with A=a_D");
    WeightEngine engine(ds, ns, opts.weights);
    std::vector<Contribution> contributions;
    for (std::size_t i = 0; i < ds.subjects.size(); ++i) {
        const auto& s = ds.subjects[i];
        if (s.arm != ad) continue;
        for (const auto& r : s.records) {
            if (r.k > K) break;
            if (r.c_next == 0 && r.d_next == 0 && r.y_next == 1) {
                const double w = engine.w_c(i, r.k, ad) * engine.w_y(i, r.k, ad, ay) *
                                 engine.w_lay(i, r.k, ad, ay);
                contributions.push_back({r.k, w});
            }
        }
    }
    return assemble_weighted(ds, ad, K, std::move(contributions), {ay, ad, std::nullopt},
                             EstimatorTag::Nu2, opts);
}

RiskCurve estimate_nu2_dagger(const EventHistoryDataset& ds, const NuisanceSet& ns, int ay,
                              int ad, int K, const SensitivityFunction& t,
                              const EstimatorOptions& opts) {
    if (K < 0 || K > ds.horizon) throw IndexOutOfRange("K outside the data horizon");
    if (ds.n_in_arm(ad) == 0) throw NoSubjectsInArm("no subjects with A=a_D");
    WeightEngine engine(ds, ns, opts.weights);
    std::vector<Contribution> contributions;
    for (std::size_t i = 0; i < ds.subjects.size(); ++i) {
        const auto& s = ds.subjects[i];
        if (s.arm != ad) continue;
        for (const auto& r : s.records) {
            if (r.k > K) break;
            if (r.c_next == 0 && r.d_next == 0 && r.y_next == 1) {
                const double w =
                    engine.w_c(i, r.k, ad) * engine.w_y_dagger(i, r.k, ad, ay, t);
                contributions.push_back({r.k, w});
            }
        }
    }
    return assemble_weighted(ds, ad, K, std::move(contributions), {ay, ad, std::nullopt},
                             EstimatorTag::Nu2Dagger, opts);
}

// ---------------------------------------------------------------------------
// Censoring-weighted cumulative incidence

CensorModel CensorModel::none() { return CensorModel{}; }

CensorModel CensorModel::fitted(FittedModel model) {
    CensorModel m;
    m.fitted_ = std::move(model);
    return m;
}

CensorModel CensorModel::empirical(const EventHistoryDataset& ds) {
    CensorModel m;
    m.empirical_ = true;
    for (const auto& s : ds.subjects) {
        std::vector<int> hist;
        for (const auto& r : s.records) {
            auto tail = interval_values(ds.schema, r, r.k);
            hist.insert(hist.end(), tail.begin(), tail.end());
            auto& cell = m.table_[{s.arm, r.k, hist}];
            cell.first += 1;
            if (r.c_next == 0) cell.second += 1;
        }
    }
    return m;
}

double CensorModel::surv_prob(const EventHistoryDataset& ds, const RecordRef& ref) const {
    if (fitted_) {
        return 1.0 - predict_prob(*fitted_, ds.schema, context_for(ds, ref));
    }
    if (!empirical_) return 1.0;
    const auto& s = ds.subjects[ref.subject];
    std::vector<int> hist;
    for (std::size_t ri = 0; ri <= ref.record; ++ri) {
        auto tail = interval_values(ds.schema, s.records[ri], s.records[ri].k);
        hist.insert(hist.end(), tail.begin(), tail.end());
    }
    auto it = table_.find({s.arm, s.records[ref.record].k, hist});
    if (it == table_.end() || it->second.first == 0.0)
        throw EmptyCell("censoring cell empty for a person-interval");
    return it->second.second / it->second.first;
}

RiskCurve ipcw_aalen_johansen(const EventHistoryDataset& ds, const CensorModel& censoring,
                              Cause cause, int arm, int K, double epsilon_pos) {
    if (K < 0 || K > ds.horizon) throw IndexOutOfRange("K outside the data horizon");
    const double n_arm = static_cast<double>(ds.n_in_arm(arm));
    if (n_arm == 0) throw NoSubjectsInArm("arm is empty");
    std::vector<double> incr(static_cast<std::size_t>(K) + 1, 0.0);
    for (std::size_t i = 0; i < ds.subjects.size(); ++i) {
        const auto& s = ds.subjects[i];
        if (s.arm != arm) continue;
        double denom = 1.0;
        for (std::size_t ri = 0; ri < s.records.size(); ++ri) {
            const auto& r = s.records[ri];
            if (r.k > K) break;
            const double pc0 = censoring.surv_prob(ds, RecordRef{i, ri});
            if (pc0 < epsilon_pos)
                throw PositivityBreach("censoring survival " + format_double(pc0) +
                                       " below epsilon");
            denom *= pc0;
            if (r.c_next != 0) break;
            const bool event = cause == Cause::EventOfInterest
                                   ? (r.d_next == 0 && r.y_next == 1)
                                   : (r.d_next == 1);
            if (event) incr[static_cast<std::size_t>(r.k)] += 1.0 / denom;
        }
    }
    RiskCurve curve;
    curve.regime = {arm, arm, std::nullopt};
    curve.tag = EstimatorTag::AalenJohansen;
    curve.cause = cause;
    curve.values.resize(static_cast<std::size_t>(K) + 1);
    double cum = 0.0;
    for (std::size_t k = 0; k < incr.size(); ++k) {
        cum += incr[k];
        curve.values[k] = cum / n_arm;
    }
    return curve;
}

// ---------------------------------------------------------------------------
// Contrasts

std::string EffectEstimate::label() const {
    switch (kind) {
        case Kind::Total: return "total";
        case Kind::AYSeparable: return "ay_sep@ad=" + std::to_string(fixed_arm);
        case Kind::ADSeparable: return "ad_sep@ay=" + std::to_string(fixed_arm);
    }
    return "?";
}

std::vector<EffectEstimate> effect_contrasts(const std::vector<RiskCurve>& curves) {
    if (curves.empty()) throw MissingRegime("no curves given");
    std::map<std::pair<int, int>, const RiskCurve*> by_regime;
    const EstimatorTag tag = curves.front().tag;
    const std::size_t len = curves.front().values.size();
    for (const auto& c : curves) {
        if (c.tag != tag) throw MissingRegime("contrasts need curves from one estimator");
        if (c.values.size() != len) throw MissingRegime("contrasts need a common horizon");
        if (c.cause && *c.cause != Cause::EventOfInterest) continue;
        by_regime[{c.regime.ay, c.regime.ad}] = &c;
    }
    auto diff = [&](const RiskCurve* a, const RiskCurve* b) {
        std::vector<double> out(len);
        for (std::size_t i = 0; i < len; ++i) out[i] = a->values[i] - b->values[i];
        return out;
    };
    std::vector<EffectEstimate> effects;
    auto get = [&](int ay, int ad) -> const RiskCurve* {
        auto it = by_regime.find({ay, ad});
        return it == by_regime.end() ? nullptr : it->second;
    };
    if (get(1, 1) && get(0, 0)) {
        EffectEstimate e;
        e.kind = EffectEstimate::Kind::Total;
        e.tag = tag;
        e.point = diff(get(1, 1), get(0, 0));
        effects.push_back(std::move(e));
    }
    for (int ad = 0; ad <= 1; ++ad)
        if (get(1, ad) && get(0, ad)) {
            EffectEstimate e;
            e.kind = EffectEstimate::Kind::AYSeparable;
            e.fixed_arm = ad;
            e.tag = tag;
            e.point = diff(get(1, ad), get(0, ad));
            effects.push_back(std::move(e));
        }
    for (int ay = 0; ay <= 1; ++ay)
        if (get(ay, 1) && get(ay, 0)) {
            EffectEstimate e;
            e.kind = EffectEstimate::Kind::ADSeparable;
            e.fixed_arm = ay;
            e.tag = tag;
            e.point = diff(get(ay, 1), get(ay, 0));
            effects.push_back(std::move(e));
        }
    if (effects.empty()) throw MissingRegime("no contrast is computable from the given regimes");
    return effects;
}

// ---------------------------------------------------------------------------
// Bootstrap

EventHistoryDataset resample_subjects(const EventHistoryDataset& ds, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const std::size_t n = ds.subjects.size();
    EventHistoryDataset out;
    out.schema = ds.schema;
    out.horizon = ds.horizon;
    out.subjects.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        const auto idx = std::min(n - 1, static_cast<std::size_t>(u * static_cast<double>(n)));
        out.subjects.push_back(ds.subjects[idx]);
    }
    return out;
}

namespace {

double percentile(std::vector<double> sorted, double q) {
    if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - std::floor(pos)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

BootstrapResult bootstrap_ci(const EventHistoryDataset& ds, const CurveEstimator& estimator,
                             int B, std::uint64_t seed, int threads) {
    if (B < 1) throw ConfigError("bootstrap needs B >= 1");
    BootstrapResult res;
    res.point = estimator(ds);
    res.resamples = B;

    std::vector<std::optional<std::vector<double>>> draws(static_cast<std::size_t>(B));
    auto run_range = [&](int begin, int end) {
        for (int i = begin; i < end; ++i) {
            try {
                draws[static_cast<std::size_t>(i)] =
                    estimator(resample_subjects(ds, seed + static_cast<std::uint64_t>(i)));
            } catch (const std::exception&) {
                // recorded as a failed resample below
            }
        }
    };
    const int nthreads = std::max(1, std::min(threads, B));
    if (nthreads == 1) {
        run_range(0, B);
    } else {
        std::vector<std::thread> pool;
        const int chunk = (B + nthreads - 1) / nthreads;
        for (int t = 0; t < nthreads; ++t)
            pool.emplace_back(run_range, t * chunk, std::min(B, (t + 1) * chunk));
        for (auto& th : pool) th.join();
    }

    std::vector<const std::vector<double>*> ok;
    for (const auto& d : draws)
        if (d) ok.push_back(&*d);
    res.failed = B - static_cast<int>(ok.size());
    if (res.failed * 10 > B)
        throw ResampleFitFailure(std::to_string(res.failed) + " of " + std::to_string(B) +
                                 " resamples failed");

    const std::size_t len = res.point.size();
    res.ci_low.resize(len);
    res.ci_high.resize(len);
    for (std::size_t k = 0; k < len; ++k) {
        std::vector<double> vals;
        vals.reserve(ok.size());
        for (const auto* d : ok) vals.push_back((*d)[k]);
        std::sort(vals.begin(), vals.end());
        res.ci_low[k] = percentile(vals, 0.025);
        res.ci_high[k] = percentile(vals, 0.975);
    }
    return res;
}

// ---------------------------------------------------------------------------
// Reporting

std::string results_csv(const std::vector<RiskCurve>& curves,
                        const std::vector<EffectEstimate>& effects) {
    std::ostringstream os;
    os << "k,regime,estimate,ci_low,ci_high,estimator_tag\n";
    auto cell = [](const std::vector<double>& v, std::size_t k) {
        return k < v.size() ? format_double(v[k]) : std::string();
    };
    for (const auto& c : curves) {
        std::string regime = c.regime.to_string();
        if (c.cause)
            regime = "a=" + std::to_string(c.regime.ay) +
                     (*c.cause == Cause::EventOfInterest ? ";cause=y" : ";cause=d");
        const auto reported = c.clipped();
        for (std::size_t k = 0; k < reported.size(); ++k) {
            os << k << "," << regime << "," << format_double(reported[k]) << ","
               << cell(c.ci_low, k) << "," << cell(c.ci_high, k) << "," << to_string(c.tag)
               << "\n";
        }
    }
    for (const auto& e : effects) {
        for (std::size_t k = 0; k < e.point.size(); ++k) {
            os << k << "," << e.label() << "," << format_double(e.point[k]) << ","
               << cell(e.ci_low, k) << "," << cell(e.ci_high, k) << "," << to_string(e.tag)
               << "\n";
        }
    }
    return os.str();
}

}  // namespace sepcr
