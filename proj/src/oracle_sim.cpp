#include "sepcr/oracle_sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <random>
#include <set>
#include <sstream>

namespace sepcr {

namespace {

constexpr double kProbSumTol = 1e-12;
constexpr std::size_t kStateCap = 10'000'000;

int find_cov(const DgpSpec& dgp, const std::string& name) {
    for (std::size_t i = 0; i < dgp.covariates.size(); ++i)
        if (dgp.covariates[i].name == name) return static_cast<int>(i);
    return -1;
}

}  // namespace

bool DgpSpec::has_censoring() const {
    for (const auto& t : c_tables)
        if (t) return true;
    return false;
}

CovariateSchema DgpSpec::measured_schema() const {
    CovariateSchema s;
    for (const auto& c : covariates) {
        if (c.latent) continue;
        CovariateSpec e;
        e.name = c.name;
        e.timing = c.timing;
        if (c.cardinality == 2) {
            e.kind = CovariateKind::Binary;
        } else {
            e.kind = CovariateKind::Categorical;
            e.cardinality = c.cardinality;
        }
        s.entries.push_back(e);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Validation

namespace {

// -1 = a_Y, -2 = a_D, -3 = a_Z, >= 0 covariate slot
struct ResolvedTable {
    const DgpTable* table = nullptr;
    std::vector<int> parent_slots;
};

struct DrawPlan {
    struct CovSlot {
        int cov = -1;  // into dgp.covariates
        int k = 0;
        int card = 2;
        bool measured = true;
        ResolvedTable table;
    };
    std::vector<CovSlot> slots;
    std::vector<std::pair<int, int>> slot_range;  // per k: [begin, end)
    std::vector<std::vector<int>> measured_slots_at;
    std::vector<ResolvedTable> c_at, d_at, y_at;  // c_at may hold null tables
    std::vector<int> per_interval_width;

    int slot_of(const DgpSpec& dgp, const std::string& name, int k) const {
        for (std::size_t i = 0; i < slots.size(); ++i)
            if (dgp.covariates[static_cast<std::size_t>(slots[i].cov)].name == name &&
                slots[i].k == k)
                return static_cast<int>(i);
        return -1;
    }
};

ResolvedTable resolve_table(const DgpSpec& dgp, const DrawPlan& plan, const DgpTable* t,
                            int before_slot, int event_k, const std::string& what) {
    ResolvedTable out;
    out.table = t;
    if (t == nullptr) return out;
    for (const auto& p : t->parents) {
        switch (p.kind) {
            case ParentRef::Kind::AY: out.parent_slots.push_back(-1); break;
            case ParentRef::Kind::AD: out.parent_slots.push_back(-2); break;
            case ParentRef::Kind::AZ: out.parent_slots.push_back(-3); break;
            case ParentRef::Kind::Cov: {
                const int s = plan.slot_of(dgp, p.cov, p.k);
                if (s < 0)
                    throw InvalidDgp(what + ": parent " + p.cov + "@" + std::to_string(p.k) +
                                     " is never drawn");
                const bool ok = before_slot >= 0 ? s < before_slot : plan.slots[s].k <= event_k;
                if (!ok)
                    throw InvalidDgp(what + ": parent " + p.cov + "@" + std::to_string(p.k) +
                                     " is drawn later");
                out.parent_slots.push_back(s);
                break;
            }
        }
    }
    return out;
}

DrawPlan build_plan(const DgpSpec& dgp) {
    DrawPlan plan;
    plan.slot_range.resize(static_cast<std::size_t>(dgp.horizon) + 1);
    plan.measured_slots_at.resize(static_cast<std::size_t>(dgp.horizon) + 1);
    plan.per_interval_width.resize(static_cast<std::size_t>(dgp.horizon) + 1, 0);

    for (int k = 0; k <= dgp.horizon; ++k) {
        plan.slot_range[static_cast<std::size_t>(k)].first = static_cast<int>(plan.slots.size());
        for (std::size_t ci = 0; ci < dgp.covariates.size(); ++ci) {
            const auto& c = dgp.covariates[ci];
            if (c.timing == CovariateTiming::Baseline && k > 0) continue;
            DrawPlan::CovSlot s;
            s.cov = static_cast<int>(ci);
            s.k = k;
            s.card = c.cardinality;
            s.measured = !c.latent;
            plan.slots.push_back(s);
            if (s.measured) {
                plan.measured_slots_at[static_cast<std::size_t>(k)].push_back(
                    static_cast<int>(plan.slots.size()) - 1);
                ++plan.per_interval_width[static_cast<std::size_t>(k)];
            }
        }
        plan.slot_range[static_cast<std::size_t>(k)].second = static_cast<int>(plan.slots.size());
    }
    // resolve covariate tables (parents must be drawn earlier)
    for (std::size_t si = 0; si < plan.slots.size(); ++si) {
        auto& s = plan.slots[si];
        const auto& name = dgp.covariates[static_cast<std::size_t>(s.cov)].name;
        auto it = dgp.cov_tables.find({name, s.k});
        if (it == dgp.cov_tables.end())
            throw InvalidDgp("missing table for " + name + "@" + std::to_string(s.k));
        s.table = resolve_table(dgp, plan, &it->second, static_cast<int>(si), -1,
                                name + "@" + std::to_string(s.k));
    }
    for (int k = 0; k <= dgp.horizon; ++k) {
        const auto ks = static_cast<std::size_t>(k);
        const DgpTable* ct = dgp.c_tables[ks] ? &*dgp.c_tables[ks] : nullptr;
        plan.c_at.push_back(resolve_table(dgp, plan, ct, -1, k, "c@" + std::to_string(k)));
        plan.d_at.push_back(
            resolve_table(dgp, plan, &dgp.d_tables[ks], -1, k, "d@" + std::to_string(k)));
        plan.y_at.push_back(
            resolve_table(dgp, plan, &dgp.y_tables[ks], -1, k, "y@" + std::to_string(k)));
    }
    return plan;
}

const std::vector<double>& table_row(const ResolvedTable& rt, const std::vector<int>& slot_values,
                                     const Regime& r) {
    static const std::vector<double> kZero{0.0};
    if (rt.table == nullptr) return kZero;
    std::vector<int> key;
    key.reserve(rt.parent_slots.size());
    for (int p : rt.parent_slots) {
        if (p == -1)
            key.push_back(r.ay);
        else if (p == -2)
            key.push_back(r.ad);
        else if (p == -3)
            key.push_back(r.az);
        else
            key.push_back(slot_values[static_cast<std::size_t>(p)]);
    }
    auto it = rt.table->rows.find(key);
    if (it == rt.table->rows.end()) throw InvalidDgp("table row missing for a reachable history");
    return it->second;
}

void check_table(const DgpSpec& dgp, const DgpTable& t, int n_probs, const std::string& what) {
    std::vector<int> cards;
    for (const auto& p : t.parents) {
        if (p.kind == ParentRef::Kind::Cov) {
            int ci = find_cov(dgp, p.cov);
            if (ci < 0) throw InvalidDgp(what + ": unknown parent " + p.cov);
            if (p.k < 0 || p.k > dgp.horizon ||
                (dgp.covariates[static_cast<std::size_t>(ci)].timing ==
                     CovariateTiming::Baseline &&
                 p.k != 0))
                throw InvalidDgp(what + ": bad parent interval for " + p.cov);
            cards.push_back(dgp.covariates[static_cast<std::size_t>(ci)].cardinality);
        } else {
            if (p.kind == ParentRef::Kind::AZ && !dgp.three_way)
                throw InvalidDgp(what + ": a_Z parent in a two-way specification");
            cards.push_back(2);
        }
    }
    std::size_t expect = 1;
    for (int c : cards) expect *= static_cast<std::size_t>(c);
    if (t.rows.size() != expect)
        throw InvalidDgp(what + ": expected " + std::to_string(expect) + " rows, found " +
                         std::to_string(t.rows.size()));
    for (const auto& [key, probs] : t.rows) {
        if (key.size() != cards.size()) throw InvalidDgp(what + ": row arity mismatch");
        for (std::size_t i = 0; i < key.size(); ++i)
            if (key[i] < 0 || key[i] >= cards[i]) throw InvalidDgp(what + ": row value out of range");
        if (static_cast<int>(probs.size()) != n_probs)
            throw InvalidDgp(what + ": wrong probability count");
        double sum = 0;
        for (double p : probs) {
            if (!(p >= 0.0 && p <= 1.0)) throw InvalidDgp(what + ": probability outside [0,1]");
            sum += p;
        }
        if (n_probs > 1 && std::fabs(sum - 1.0) > kProbSumTol)
            throw InvalidDgp(what + ": probabilities sum to " + format_double(sum));
    }
}

}  // namespace

void DgpSpec::check() const {
    if (horizon < 0) throw InvalidDgp("horizon must be >= 0");
    if (!(arm_prob > 0.0 && arm_prob < 1.0)) throw InvalidDgp("arm_prob must be in (0,1)");
    std::set<std::string> names;
    for (const auto& c : covariates) {
        if (!names.insert(c.name).second) throw InvalidDgp("duplicate covariate " + c.name);
        if (c.cardinality < 2) throw InvalidDgp("covariate " + c.name + " needs cardinality >= 2");
    }
    if (c_tables.size() != static_cast<std::size_t>(horizon) + 1 ||
        d_tables.size() != static_cast<std::size_t>(horizon) + 1 ||
        y_tables.size() != static_cast<std::size_t>(horizon) + 1)
        throw InvalidDgp("event tables must cover k = 0.." + std::to_string(horizon));

    for (const auto& c : covariates) {
        const int last = c.timing == CovariateTiming::Baseline ? 0 : horizon;
        for (int k = 0; k <= last; ++k) {
            auto it = cov_tables.find({c.name, k});
            if (it == cov_tables.end())
                throw InvalidDgp("missing table for " + c.name + "@" + std::to_string(k));
            check_table(*this, it->second, c.cardinality, c.name + "@" + std::to_string(k));
        }
    }
    for (int k = 0; k <= horizon; ++k) {
        const auto ks = static_cast<std::size_t>(k);
        if (c_tables[ks]) check_table(*this, *c_tables[ks], 1, "c@" + std::to_string(k));
        check_table(*this, d_tables[ks], 1, "d@" + std::to_string(k));
        check_table(*this, y_tables[ks], 1, "y@" + std::to_string(k));
    }
    build_plan(*this);  // resolves parents; throws on temporal violations
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

std::vector<std::string> tokenize(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string w;
    while (ss >> w) out.push_back(w);
    return out;
}

ParentRef parse_parent(const std::string& tok, int lineno) {
    ParentRef p;
    if (tok == "ay") {
        p.kind = ParentRef::Kind::AY;
        return p;
    }
    if (tok == "ad") {
        p.kind = ParentRef::Kind::AD;
        return p;
    }
    if (tok == "az") {
        p.kind = ParentRef::Kind::AZ;
        return p;
    }
    auto at = tok.find('@');
    if (at == std::string::npos)
        throw InvalidDgp("line " + std::to_string(lineno) + ": parent '" + tok +
                         "' must be ay, ad, az or name@k");
    p.kind = ParentRef::Kind::Cov;
    p.cov = tok.substr(0, at);
    try {
        p.k = std::stoi(tok.substr(at + 1));
    } catch (const std::exception&) {
        throw InvalidDgp("line " + std::to_string(lineno) + ": bad parent interval in '" + tok +
                         "'");
    }
    return p;
}

}  // namespace

DgpSpec parse_dgp(const std::string& text) {
    DgpSpec dgp;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    DgpTable* open_table = nullptr;
    std::string open_name;
    bool horizon_set = false;

    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto toks = tokenize(line);
        if (toks.empty()) continue;
        auto fail = [&](const std::string& msg) {
            throw InvalidDgp("line " + std::to_string(lineno) + ": " + msg);
        };
        const std::string& head = toks[0];
        if (head == "horizon") {
            if (toks.size() != 2) fail("horizon <K>");
            dgp.horizon = std::stoi(toks[1]);
            horizon_set = true;
            dgp.c_tables.assign(static_cast<std::size_t>(dgp.horizon) + 1, std::nullopt);
            dgp.d_tables.assign(static_cast<std::size_t>(dgp.horizon) + 1, DgpTable{});
            dgp.y_tables.assign(static_cast<std::size_t>(dgp.horizon) + 1, DgpTable{});
        } else if (head == "design") {
            if (toks.size() != 2 || (toks[1] != "two_arm" && toks[1] != "four_arm"))
                fail("design two_arm|four_arm");
            dgp.design = toks[1] == "two_arm" ? TrialDesign::TwoArm : TrialDesign::FourArm;
        } else if (head == "arm_prob") {
            if (toks.size() != 2) fail("arm_prob <p>");
            dgp.arm_prob = std::stod(toks[1]);
        } else if (head == "three_way") {
            dgp.three_way = true;
        } else if (head == "covariate" || head == "latent") {
            if (toks.size() != 4) fail(head + " <name> <cardinality> baseline|timevarying");
            DgpCovariate c;
            c.name = toks[1];
            c.cardinality = std::stoi(toks[2]);
            if (toks[3] == "baseline")
                c.timing = CovariateTiming::Baseline;
            else if (toks[3] == "timevarying")
                c.timing = CovariateTiming::TimeVarying;
            else
                fail("timing must be baseline or timevarying");
            c.latent = head == "latent";
            dgp.covariates.push_back(std::move(c));
        } else if (head == "table") {
            if (!horizon_set) fail("horizon must come before tables");
            if (toks.size() != 3 || toks[2].rfind("k=", 0) != 0) fail("table <var> k=<int>");
            const int k = std::stoi(toks[2].substr(2));
            if (k < 0 || k > dgp.horizon) fail("table interval out of range");
            const auto ks = static_cast<std::size_t>(k);
            open_name = toks[1] + "@" + std::to_string(k);
            if (toks[1] == "c") {
                dgp.c_tables[ks] = DgpTable{};
                open_table = &*dgp.c_tables[ks];
            } else if (toks[1] == "d") {
                open_table = &dgp.d_tables[ks];
            } else if (toks[1] == "y") {
                open_table = &dgp.y_tables[ks];
            } else {
                if (find_cov(dgp, toks[1]) < 0) fail("unknown variable " + toks[1]);
                open_table = &dgp.cov_tables[{toks[1], k}];
            }
            *open_table = DgpTable{};
        } else if (head == "parents") {
            if (open_table == nullptr) fail("parents outside a table");
            for (std::size_t i = 1; i < toks.size(); ++i)
                open_table->parents.push_back(parse_parent(toks[i], lineno));
        } else if (head == "row") {
            if (open_table == nullptr) fail("row outside a table");
            std::vector<int> key;
            std::vector<double> probs;
            bool after_colon = false;
            for (std::size_t i = 1; i < toks.size(); ++i) {
                if (toks[i] == ":") {
                    after_colon = true;
                    continue;
                }
                if (after_colon)
                    probs.push_back(std::stod(toks[i]));
                else
                    key.push_back(std::stoi(toks[i]));
            }
            if (!after_colon) fail("row needs ':' before probabilities");
            if (key.size() != open_table->parents.size())
                fail("row has " + std::to_string(key.size()) + " parent values, table declares " +
                     std::to_string(open_table->parents.size()));
            if (!open_table->rows.emplace(std::move(key), std::move(probs)).second)
                fail("duplicate row in " + open_name);
        } else {
            fail("unknown directive '" + head + "'");
        }
    }
    if (!horizon_set) throw InvalidDgp("missing horizon");
    auto scan_az = [&dgp](const DgpTable& t) {
        for (const auto& p : t.parents)
            if (p.kind == ParentRef::Kind::AZ) dgp.three_way = true;
    };
    for (const auto& [key, t] : dgp.cov_tables) scan_az(t);
    for (const auto& t : dgp.d_tables) scan_az(t);
    for (const auto& t : dgp.y_tables) scan_az(t);
    for (const auto& t : dgp.c_tables)
        if (t) scan_az(*t);
    dgp.check();
    return dgp;
}

DgpSpec load_dgp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_dgp(ss.str());
}

// ---------------------------------------------------------------------------
// Enumeration core

namespace {

// Called once per alive-and-uncensored node of the outcome tree, right
// before the interval-k event draws.
using AtRiskFn = std::function<void(int k, const std::vector<int>& slot_values, double p,
                                    double pc, double pd, double py)>;

struct Enumerator {
    const DgpSpec& dgp;
    const DrawPlan plan;
    Regime regime;
    bool with_censoring;
    std::size_t nodes = 0;

    Enumerator(const DgpSpec& d, Regime r, bool cens)
        : dgp(d), plan(build_plan(d)), regime(r), with_censoring(cens) {}

    void run(const AtRiskFn& fn) {
        std::vector<int> values(plan.slots.size(), 0);
        descend_covariates(0, plan.slot_range[0].first, 1.0, values, fn);
    }

    void descend_covariates(int k, int slot, double p, std::vector<int>& values,
                            const AtRiskFn& fn) {
        if (p == 0.0) return;
        if (slot == plan.slot_range[static_cast<std::size_t>(k)].second) {
            at_interval(k, p, values, fn);
            return;
        }
        const auto& s = plan.slots[static_cast<std::size_t>(slot)];
        const auto& probs = table_row(s.table, values, regime);
        for (int v = 0; v < s.card; ++v) {
            if (probs[static_cast<std::size_t>(v)] == 0.0) continue;
            values[static_cast<std::size_t>(slot)] = v;
            descend_covariates(k, slot + 1, p * probs[static_cast<std::size_t>(v)], values, fn);
        }
        values[static_cast<std::size_t>(slot)] = 0;
    }

    void at_interval(int k, double p, std::vector<int>& values, const AtRiskFn& fn) {
        if (++nodes > kStateCap) throw StateSpaceTooLarge("enumeration exceeds the node cap");
        const auto ks = static_cast<std::size_t>(k);
        const double pc = with_censoring ? table_row(plan.c_at[ks], values, regime)[0] : 0.0;
        const double pd = table_row(plan.d_at[ks], values, regime)[0];
        const double py = table_row(plan.y_at[ks], values, regime)[0];
        fn(k, values, p, pc, pd, py);
        const double alive = p * (1.0 - pc) * (1.0 - pd) * (1.0 - py);
        if (k < dgp.horizon)
            descend_covariates(k + 1, plan.slot_range[ks + 1].first, alive, values, fn);
    }
};

HistKey measured_key(const DrawPlan& plan, const std::vector<int>& slot_values, int through_k) {
    HistKey key;
    for (int m = 0; m <= through_k; ++m)
        for (int s : plan.measured_slots_at[static_cast<std::size_t>(m)])
            key.push_back(slot_values[static_cast<std::size_t>(s)]);
    return key;
}

}  // namespace

HistKey MeasuredLaw::prefix_of(const HistKey& h, int j) const {
    std::size_t len = 0;
    for (int m = 0; m < j; ++m) len += static_cast<std::size_t>(per_interval_width[m]);
    return HistKey(h.begin(), h.begin() + static_cast<long>(len));
}

double MeasuredLaw::prefix_mass(int j, const HistKey& prefix) const {
    double total = 0;
    for (const auto& [key, agg] : at[static_cast<std::size_t>(j)])
        if (prefix_of(key, j) == prefix) total += agg.mass;
    return total;
}

MeasuredLaw measured_regime_law(const DgpSpec& dgp, const Regime& r, bool with_censoring) {
    Enumerator en(dgp, r, with_censoring);
    MeasuredLaw law;
    law.horizon = dgp.horizon;
    law.per_interval_width = en.plan.per_interval_width;
    law.at.resize(static_cast<std::size_t>(dgp.horizon) + 1);
    en.run([&](int k, const std::vector<int>& values, double p, double pc, double pd, double py) {
        auto& agg = law.at[static_cast<std::size_t>(k)][measured_key(en.plan, values, k)];
        agg.mass += p;
        agg.c0 += p * (1 - pc);
        agg.c0d0 += p * (1 - pc) * (1 - pd);
        agg.c0d0y1 += p * (1 - pc) * (1 - pd) * py;
    });
    return law;
}

std::vector<double> true_counterfactual_risk_curve(const DgpSpec& dgp, const Regime& r) {
    Enumerator en(dgp, r, /*with_censoring=*/false);
    std::vector<double> incr(static_cast<std::size_t>(dgp.horizon) + 1, 0.0);
    en.run([&](int k, const std::vector<int>&, double p, double, double pd, double py) {
        incr[static_cast<std::size_t>(k)] += p * (1 - pd) * py;
    });
    for (std::size_t i = 1; i < incr.size(); ++i) incr[i] += incr[i - 1];
    return incr;
}

double true_counterfactual_risk(const DgpSpec& dgp, const Regime& r, int k) {
    if (k < 0 || k > dgp.horizon) throw IndexOutOfRange("risk index outside 0..K");
    return true_counterfactual_risk_curve(dgp, r)[static_cast<std::size_t>(k)];
}

// ---------------------------------------------------------------------------
// Simulation

namespace {

double next_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

int draw_categorical(std::mt19937_64& rng, const std::vector<double>& probs) {
    const double u = next_uniform(rng);
    double cum = 0;
    for (std::size_t v = 0; v < probs.size(); ++v) {
        cum += probs[v];
        if (u < cum) return static_cast<int>(v);
    }
    return static_cast<int>(probs.size()) - 1;
}

std::vector<IntervalRecord> simulate_records(const DgpSpec& dgp, const DrawPlan& plan,
                                             const Regime& regime, std::mt19937_64& rng) {
    std::vector<int> values(plan.slots.size(), 0);
    std::vector<IntervalRecord> records;
    for (int k = 0; k <= dgp.horizon; ++k) {
        const auto ks = static_cast<std::size_t>(k);
        for (int s = plan.slot_range[ks].first; s < plan.slot_range[ks].second; ++s) {
            const auto& slot = plan.slots[static_cast<std::size_t>(s)];
            values[static_cast<std::size_t>(s)] =
                draw_categorical(rng, table_row(slot.table, values, regime));
        }
        IntervalRecord rec;
        rec.k = k;
        for (const auto& c : dgp.covariates) {
            if (c.latent) continue;
            const int at = c.timing == CovariateTiming::Baseline ? 0 : k;
            rec.l.push_back(values[static_cast<std::size_t>(plan.slot_of(dgp, c.name, at))]);
        }
        const double pc = plan.c_at[ks].table ? table_row(plan.c_at[ks], values, regime)[0] : 0.0;
        const double pd = table_row(plan.d_at[ks], values, regime)[0];
        const double py = table_row(plan.y_at[ks], values, regime)[0];
        if (next_uniform(rng) < pc) {
            rec.c_next = 1;
            rec.d_next = kMissing;
            rec.y_next = kMissing;
            records.push_back(std::move(rec));
            return records;
        }
        rec.c_next = 0;
        if (next_uniform(rng) < pd) {
            rec.d_next = 1;
            rec.y_next = kMissing;
            records.push_back(std::move(rec));
            return records;
        }
        rec.d_next = 0;
        if (next_uniform(rng) < py) {
            rec.y_next = 1;
            records.push_back(std::move(rec));
            return records;
        }
        rec.y_next = 0;
        records.push_back(std::move(rec));
    }
    return records;
}

}  // namespace

EventHistoryDataset simulate(const DgpSpec& dgp, std::size_t n, std::uint64_t seed) {
    if (n < 1) throw InvalidDgp("need at least one subject");
    if (dgp.design != TrialDesign::TwoArm)
        throw InvalidDgp("simulate handles the two-arm design; use simulate_four_arm");
    const DrawPlan plan = build_plan(dgp);
    std::mt19937_64 rng(seed);
    EventHistoryDataset ds;
    ds.schema = dgp.measured_schema();
    ds.horizon = dgp.horizon;
    ds.subjects.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int arm = next_uniform(rng) < dgp.arm_prob ? 1 : 0;
        Subject s;
        s.id = std::to_string(i + 1);
        s.arm = arm;
        s.records = simulate_records(dgp, plan, Regime{arm, arm, arm}, rng);
        ds.subjects.push_back(std::move(s));
    }
    return ds;
}

FourArmDataset simulate_four_arm(const DgpSpec& dgp, std::size_t n, std::uint64_t seed) {
    if (n < 1) throw InvalidDgp("need at least one subject");
    const DrawPlan plan = build_plan(dgp);
    std::mt19937_64 rng(seed);
    FourArmDataset ds;
    ds.schema = dgp.measured_schema();
    ds.horizon = dgp.horizon;
    ds.three_way = dgp.three_way;
    const int cells = dgp.three_way ? 8 : 4;
    for (std::size_t i = 0; i < n; ++i) {
        const int cell = std::min(cells - 1, static_cast<int>(next_uniform(rng) * cells));
        FourArmSubject s;
        s.id = std::to_string(i + 1);
        s.ay = cell & 1;
        s.ad = (cell >> 1) & 1;
        s.az = dgp.three_way ? (cell >> 2) & 1 : 0;
        s.records = simulate_records(dgp, plan, Regime{s.ay, s.ad, s.az}, rng);
        ds.subjects.push_back(std::move(s));
    }
    return ds;
}

std::string to_csv(const FourArmDataset& ds) {
    std::ostringstream os;
    os << "id,k,ay,ad";
    if (ds.three_way) os << ",az";
    os << ",c_next,d_next,y_next";
    for (const auto& e : ds.schema.entries) os << "," << e.name;
    os << "\n";
    auto cell = [](Outcome v) { return v == kMissing ? std::string() : std::to_string(int(v)); };
    for (const auto& s : ds.subjects) {
        for (const auto& r : s.records) {
            os << s.id << "," << r.k << "," << s.ay << "," << s.ad;
            if (ds.three_way) os << "," << s.az;
            os << "," << cell(r.c_next) << "," << cell(r.d_next) << "," << cell(r.y_next);
            for (double v : r.l) os << "," << format_double(v);
            os << "\n";
        }
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Exact dataset

namespace {

struct IntervalValues {
    std::vector<std::vector<int>> per_interval;  // measured values per interval
};

IntervalValues split_key(const MeasuredLaw& law, const HistKey& key, int through_j) {
    IntervalValues out;
    std::size_t pos = 0;
    for (int m = 0; m <= through_j; ++m) {
        const auto w = static_cast<std::size_t>(law.per_interval_width[static_cast<std::size_t>(m)]);
        out.per_interval.emplace_back(key.begin() + static_cast<long>(pos),
                                      key.begin() + static_cast<long>(pos + w));
        pos += w;
    }
    return out;
}

std::vector<double> record_values(const DgpSpec& dgp, const IntervalValues& vals, int m) {
    // Dataset rows repeat baseline covariates on every record. Interval 0 of
    // the history key holds baseline + time-varying@0 values in declaration
    // order; later intervals hold only the time-varying values.
    std::vector<double> l;
    std::size_t i0 = 0;       // cursor into interval-0 values
    std::size_t tv_index = 0; // cursor into interval-m values
    for (const auto& c : dgp.covariates) {
        if (c.latent) continue;
        if (c.timing == CovariateTiming::Baseline || m == 0) {
            l.push_back(vals.per_interval[0][i0]);
            ++i0;
        } else {
            l.push_back(vals.per_interval[static_cast<std::size_t>(m)][tv_index]);
            ++i0;  // keep the interval-0 cursor aligned with declaration order
        }
        if (c.timing == CovariateTiming::TimeVarying) ++tv_index;
    }
    return l;
}

}  // namespace

EventHistoryDataset exact_dataset(const DgpSpec& dgp, std::size_t n_per_arm) {
    if (dgp.design != TrialDesign::TwoArm)
        throw InvalidDgp("exact_dataset requires the two-arm design");
    EventHistoryDataset ds;
    ds.schema = dgp.measured_schema();
    ds.horizon = dgp.horizon;
    std::size_t next_id = 1;

    auto integral = [](double x, const std::string& what) {
        const double r = std::round(x);
        if (std::fabs(x - r) > 1e-6)
            throw InvalidDgp("probability * n is not integral for " + what + " (" +
                             format_double(x) + ")");
        return static_cast<std::size_t>(r);
    };

    for (int arm = 0; arm <= 1; ++arm) {
        const MeasuredLaw law =
            measured_regime_law(dgp, Regime{arm, arm, arm}, dgp.has_censoring());
        const double n_a = static_cast<double>(n_per_arm);
        for (int j = 0; j <= dgp.horizon; ++j) {
            for (const auto& [key, agg] : law.at[static_cast<std::size_t>(j)]) {
                const IntervalValues vals = split_key(law, key, j);
                auto emit = [&](std::size_t count, Outcome c, Outcome d, Outcome y) {
                    for (std::size_t rep = 0; rep < count; ++rep) {
                        Subject s;
                        s.id = std::to_string(next_id++);
                        s.arm = arm;
                        for (int m = 0; m <= j; ++m) {
                            IntervalRecord rec;
                            rec.k = m;
                            rec.l = record_values(dgp, vals, m);
                            if (m < j) {
                                rec.c_next = rec.d_next = rec.y_next = 0;
                            } else {
                                rec.c_next = c;
                                rec.d_next = d;
                                rec.y_next = y;
                            }
                            s.records.push_back(std::move(rec));
                        }
                        ds.subjects.push_back(std::move(s));
                    }
                };
                const std::string at = "history at k=" + std::to_string(j);
                emit(integral((agg.mass - agg.c0) * n_a, "censoring, " + at), 1, kMissing,
                     kMissing);
                emit(integral((agg.c0 - agg.c0d0) * n_a, "competing event, " + at), 0, 1,
                     kMissing);
                emit(integral(agg.c0d0y1 * n_a, "event, " + at), 0, 0, 1);
                if (j == dgp.horizon)
                    emit(integral((agg.c0d0 - agg.c0d0y1) * n_a, "survivors, " + at), 0, 0, 0);
            }
        }
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Exact identification formula and weighted representations

namespace {

struct BlockLayout {
    // per interval: which positions of the interval values are A_D-side
    std::vector<std::vector<bool>> is_ad;

    static BlockLayout build(const DgpSpec& dgp, const std::vector<std::string>& lad_block) {
        for (const auto& name : lad_block) {
            const int ci = find_cov(dgp, name);
            if (ci < 0 || dgp.covariates[static_cast<std::size_t>(ci)].latent)
                throw PartitionMismatch("block names unknown or latent covariate " + name);
        }
        BlockLayout out;
        out.is_ad.resize(static_cast<std::size_t>(dgp.horizon) + 1);
        for (int k = 0; k <= dgp.horizon; ++k) {
            for (const auto& c : dgp.covariates) {
                if (c.latent) continue;
                if (c.timing == CovariateTiming::Baseline) {
                    // baseline covariates precede randomization; they sit on
                    // the A_D side of the within-interval order at k = 0
                    if (k == 0) out.is_ad[0].push_back(true);
                    continue;
                }
                const bool ad = std::find(lad_block.begin(), lad_block.end(), c.name) !=
                                lad_block.end();
                out.is_ad[static_cast<std::size_t>(k)].push_back(ad);
            }
        }
        return out;
    }

    std::vector<int> ad_part(int k, const std::vector<int>& tail) const {
        std::vector<int> out;
        for (std::size_t i = 0; i < tail.size(); ++i)
            if (is_ad[static_cast<std::size_t>(k)][i]) out.push_back(tail[i]);
        return out;
    }
};

// Per-interval lookup structures for one regime law.
struct LawIndex {
    const MeasuredLaw law;
    // per j: prefix -> total mass, and (prefix, ad-part) -> mass
    std::vector<std::map<HistKey, double>> prefix_total;
    std::vector<std::map<std::pair<HistKey, std::vector<int>>, double>> ad_total;
    // per j: prefix -> set of interval-j value tuples
    std::vector<std::map<HistKey, std::set<std::vector<int>>>> tails;

    LawIndex(MeasuredLaw l, const BlockLayout& blocks) : law(std::move(l)) {
        const auto n = law.at.size();
        prefix_total.resize(n);
        ad_total.resize(n);
        tails.resize(n);
        for (std::size_t j = 0; j < n; ++j) {
            for (const auto& [key, agg] : law.at[j]) {
                const HistKey prefix = law.prefix_of(key, static_cast<int>(j));
                std::vector<int> tail(key.begin() + static_cast<long>(prefix.size()), key.end());
                prefix_total[j][prefix] += agg.mass;
                ad_total[j][{prefix, blocks.ad_part(static_cast<int>(j), tail)}] += agg.mass;
                tails[j][prefix].insert(tail);
            }
        }
    }

    const HistAgg* agg(int j, const HistKey& key) const {
        const auto& m = law.at[static_cast<std::size_t>(j)];
        auto it = m.find(key);
        return it == m.end() ? nullptr : &it->second;
    }
};

HistKey concat(const HistKey& prefix, const std::vector<int>& tail) {
    HistKey out = prefix;
    out.insert(out.end(), tail.begin(), tail.end());
    return out;
}

double hazard_y(const LawIndex& ix, int j, const HistKey& key, const std::string& what) {
    const HistAgg* a = ix.agg(j, key);
    if (a == nullptr || a->c0d0 <= 0.0)
        throw UndefinedConditional("event-of-interest hazard undefined: " + what);
    return a->c0d0y1 / a->c0d0;
}

double surv_d(const LawIndex& ix, int j, const HistKey& key, const std::string& what) {
    const HistAgg* a = ix.agg(j, key);
    if (a == nullptr || a->c0 <= 0.0)
        throw UndefinedConditional("competing-event survival undefined: " + what);
    return a->c0d0 / a->c0;
}

double surv_c(const LawIndex& ix, int j, const HistKey& key, const std::string& what) {
    const HistAgg* a = ix.agg(j, key);
    if (a == nullptr || a->mass <= 0.0)
        throw UndefinedConditional("censoring survival undefined: " + what);
    return a->c0 / a->mass;
}

}  // namespace

double exact_gformula(const DgpSpec& dgp, int ay, int ad, int k,
                      const std::vector<std::string>& lad_block) {
    if (dgp.three_way) throw InvalidDgp("two-way formula on a three-way specification");
    if (k < 0 || k > dgp.horizon) throw IndexOutOfRange("k outside 0..K");
    const bool cens = dgp.has_censoring();
    const BlockLayout blocks = BlockLayout::build(dgp, lad_block);
    const LawIndex law_y(measured_regime_law(dgp, Regime{ay, ay, ay}, cens), blocks);
    const LawIndex law_d(measured_regime_law(dgp, Regime{ad, ad, ad}, cens), blocks);

    std::vector<double> risk(static_cast<std::size_t>(k) + 1, 0.0);
    // prod carries all factors through interval j-1 plus the survival factor
    // for the event of interest entering interval j
    std::function<void(int, const HistKey&, double)> rec = [&](int j, const HistKey& prefix,
                                                               double prod) {
        if (j > k || prod == 0.0) return;
        const auto js = static_cast<std::size_t>(j);
        auto py_it = law_y.prefix_total[js].find(prefix);
        auto pd_it = law_d.prefix_total[js].find(prefix);
        if (pd_it == law_d.prefix_total[js].end() || pd_it->second <= 0.0)
            throw UndefinedConditional("covariate law unreachable in the a_D arm at k=" +
                                       std::to_string(j));
        if (py_it == law_y.prefix_total[js].end() || py_it->second <= 0.0)
            throw UndefinedConditional("covariate history unreachable in the a_Y arm at k=" +
                                       std::to_string(j));

        // union of interval-j covariate values seen in either arm
        std::set<std::vector<int>> cand;
        if (auto it = law_y.tails[js].find(prefix); it != law_y.tails[js].end())
            cand.insert(it->second.begin(), it->second.end());
        if (auto it = law_d.tails[js].find(prefix); it != law_d.tails[js].end())
            cand.insert(it->second.begin(), it->second.end());

        for (const auto& tail : cand) {
            const auto adp = blocks.ad_part(j, tail);
            double f_ad = 0.0;
            if (auto it = law_d.ad_total[js].find({prefix, adp}); it != law_d.ad_total[js].end())
                f_ad = it->second / pd_it->second;
            if (f_ad == 0.0) continue;

            auto ady_it = law_y.ad_total[js].find({prefix, adp});
            const HistKey key = concat(prefix, tail);
            const HistAgg* ay_agg = law_y.agg(j, key);
            const double ay_mass = ay_agg ? ay_agg->mass : 0.0;
            if (ady_it == law_y.ad_total[js].end() || ady_it->second <= 0.0) {
                // the a_D arm reaches this A_D-side value but the a_Y arm
                // never does: the A_Y-side conditional does not exist
                throw UndefinedConditional(
                    "A_Y-side covariate conditional undefined at k=" + std::to_string(j));
            }
            const double f_ay = ay_mass / ady_it->second;
            if (f_ay == 0.0) continue;

            const std::string at = "k=" + std::to_string(j);
            const double sd = surv_d(law_d, j, key, at);
            const double hy = hazard_y(law_y, j, key, at);
            const double here = prod * f_ad * f_ay * sd;
            risk[js] += here * hy;
            if (j < k) rec(j + 1, key, here * (1.0 - hy));
        }
    };
    rec(0, {}, 1.0);
    for (std::size_t i = 1; i < risk.size(); ++i) risk[i] += risk[i - 1];
    return risk[static_cast<std::size_t>(k)];
}

double exact_gformula(const DgpSpec& dgp, int ay, int ad, int k) {
    std::vector<std::string> all;
    for (const auto& c : dgp.covariates)
        if (!c.latent && c.timing == CovariateTiming::TimeVarying) all.push_back(c.name);
    return exact_gformula(dgp, ay, ad, k, all);
}

double exact_gformula_three_way(const DgpSpec& dgp, int ay, int ad, int az, int k) {
    if (k < 0 || k > dgp.horizon) throw IndexOutOfRange("k outside 0..K");
    const bool cens = dgp.has_censoring();
    const BlockLayout blocks = BlockLayout::build(dgp, {});
    const LawIndex law_y(measured_regime_law(dgp, Regime{ay, ay, ay}, cens), blocks);
    const LawIndex law_d(measured_regime_law(dgp, Regime{ad, ad, ad}, cens), blocks);
    const LawIndex law_z(measured_regime_law(dgp, Regime{az, az, az}, cens), blocks);

    std::vector<double> risk(static_cast<std::size_t>(k) + 1, 0.0);
    std::function<void(int, const HistKey&, double)> rec = [&](int j, const HistKey& prefix,
                                                               double prod) {
        if (j > k || prod == 0.0) return;
        const auto js = static_cast<std::size_t>(j);
        auto pz_it = law_z.prefix_total[js].find(prefix);
        if (pz_it == law_z.prefix_total[js].end() || pz_it->second <= 0.0)
            throw UndefinedConditional("covariate history unreachable in the a_Z arm at k=" +
                                       std::to_string(j));
        auto tails_it = law_z.tails[js].find(prefix);
        if (tails_it == law_z.tails[js].end()) return;
        for (const auto& tail : tails_it->second) {
            const HistKey key = concat(prefix, tail);
            const HistAgg* z_agg = law_z.agg(j, key);
            const double f_l = (z_agg ? z_agg->mass : 0.0) / pz_it->second;
            if (f_l == 0.0) continue;
            const std::string at = "k=" + std::to_string(j);
            const double sd = surv_d(law_d, j, key, at);
            const double hy = hazard_y(law_y, j, key, at);
            const double here = prod * f_l * sd;
            risk[js] += here * hy;
            if (j < k) rec(j + 1, key, here * (1.0 - hy));
        }
    };
    rec(0, {}, 1.0);
    for (std::size_t i = 1; i < risk.size(); ++i) risk[i] += risk[i - 1];
    return risk[static_cast<std::size_t>(k)];
}

// ---------------------------------------------------------------------------
// Weighted representations on the exact law

namespace {

struct ArmPair {
    const LawIndex& own;    // the arm being averaged over
    const LawIndex& other;  // the counterfactual arm
    double p_own, p_other;
};

// Pr(A = own | conditioning event with masses m_own, m_other)
double arm_posterior(double p_own, double m_own, double p_other, double m_other) {
    const double denom = p_own * m_own + p_other * m_other;
    if (denom <= 0.0) throw UndefinedConditional("treatment model conditioning event has mass 0");
    return p_own * m_own / denom;
}

double mass_or_zero(const std::map<HistKey, double>& m, const HistKey& k) {
    auto it = m.find(k);
    return it == m.end() ? 0.0 : it->second;
}

double admass_or_zero(const std::map<std::pair<HistKey, std::vector<int>>, double>& m,
                      const HistKey& prefix, const std::vector<int>& adp) {
    auto it = m.find({prefix, adp});
    return it == m.end() ? 0.0 : it->second;
}

}  // namespace

double exact_weighted_repr(const DgpSpec& dgp, int ay, int ad, int k, WeightedRepr which,
                           ReprForm form, const std::vector<std::string>& lad_block) {
    if (dgp.three_way) throw InvalidDgp("two-way representation on a three-way specification");
    if (k < 0 || k > dgp.horizon) throw IndexOutOfRange("k outside 0..K");
    const bool cens = dgp.has_censoring();
    const BlockLayout blocks = BlockLayout::build(dgp, lad_block);
    const LawIndex law_ay(measured_regime_law(dgp, Regime{ay, ay, ay}, cens), blocks);
    const LawIndex law_ad(measured_regime_law(dgp, Regime{ad, ad, ad}, cens), blocks);
    const double p1 = dgp.arm_prob, p0 = 1.0 - dgp.arm_prob;
    auto arm_p = [&](int a) { return a == 1 ? p1 : p0; };

    // averaging arm: a_Y for the D-weight form, a_D for the Y-weight form
    const bool d_form = which == WeightedRepr::SumOverDWeights;
    const LawIndex& base = d_form ? law_ay : law_ad;
    const LawIndex& cf = d_form ? law_ad : law_ay;
    const double p_base = arm_p(d_form ? ay : ad);
    const double p_cf = arm_p(d_form ? ad : ay);

    std::vector<double> risk(static_cast<std::size_t>(k) + 1, 0.0);

    // walk the support of the averaging arm, carrying the running weight
    // products through interval j
    struct Carry {
        double wc = 1.0;       // 1 / prod censoring survival
        double wmain = 1.0;    // W_D or W_Y survival part
        double wl = 1.0;       // covariate-block weight
    };
    std::function<void(int, const HistKey&, const Carry&)> rec = [&](int j, const HistKey& prefix,
                                                                     const Carry& carry) {
        if (j > k) return;
        const auto js = static_cast<std::size_t>(j);
        auto tails_it = base.tails[js].find(prefix);
        if (tails_it == base.tails[js].end()) return;
        for (const auto& tail : tails_it->second) {
            const HistKey key = concat(prefix, tail);
            const HistAgg* agg = base.agg(j, key);
            if (agg == nullptr || agg->mass <= 0.0) continue;
            const std::string at = "k=" + std::to_string(j);
            Carry next = carry;
            next.wc /= surv_c(base, j, key, at);

            if (d_form) {
                next.wmain *= surv_d(cf, j, key, at) / surv_d(base, j, key, at);
            }
            // covariate-block weight factor at j
            const auto adp = blocks.ad_part(j, tail);
            if (form == ReprForm::CovariateDensity) {
                const double den_base = mass_or_zero(base.prefix_total[js], prefix);
                const double den_cf = mass_or_zero(cf.prefix_total[js], prefix);
                if (den_base <= 0.0 || den_cf <= 0.0)
                    throw UndefinedConditional("covariate density undefined at " + at);
                if (d_form) {
                    // density of the A_D-side values under a_D vs a_Y
                    const double num_cf = admass_or_zero(cf.ad_total[js], prefix, adp) / den_cf;
                    const double num_base =
                        admass_or_zero(base.ad_total[js], prefix, adp) / den_base;
                    if (num_base <= 0.0)
                        throw UndefinedConditional("A_D-side density zero in the a_Y arm at " + at);
                    next.wl *= num_cf / num_base;
                } else {
                    // density of the A_Y-side values given the A_D-side ones
                    const double ad_base = admass_or_zero(base.ad_total[js], prefix, adp);
                    const double ad_cf = admass_or_zero(cf.ad_total[js], prefix, adp);
                    if (ad_base <= 0.0 || ad_cf <= 0.0)
                        throw UndefinedConditional("A_Y-side density undefined at " + at);
                    const double f_base = agg->mass / ad_base;
                    const HistAgg* cf_agg = cf.agg(j, key);
                    const double f_cf = (cf_agg ? cf_agg->mass : 0.0) / ad_cf;
                    if (f_base <= 0.0)
                        throw UndefinedConditional("A_Y-side density zero in the a_D arm at " + at);
                    next.wl *= f_cf / f_base;
                }
            } else {
                // treatment-model odds form
                const double own_prefix = mass_or_zero(base.prefix_total[js], prefix);
                const double cf_prefix = mass_or_zero(cf.prefix_total[js], prefix);
                const double own_ad = admass_or_zero(base.ad_total[js], prefix, adp);
                const double cf_ad = admass_or_zero(cf.ad_total[js], prefix, adp);
                if (d_form) {
                    const double pr_cf_given_ad = arm_posterior(p_cf, cf_ad, p_base, own_ad);
                    const double pr_base_given_ad = 1.0 - pr_cf_given_ad;
                    const double pr_base_given_past =
                        arm_posterior(p_base, own_prefix, p_cf, cf_prefix);
                    const double pr_cf_given_past = 1.0 - pr_base_given_past;
                    if (pr_base_given_ad <= 0.0 || pr_cf_given_past <= 0.0)
                        throw UndefinedConditional("treatment odds undefined at " + at);
                    next.wl *= (pr_cf_given_ad / pr_base_given_ad) *
                               (pr_base_given_past / pr_cf_given_past);
                } else {
                    const HistAgg* cf_agg = cf.agg(j, key);
                    const double own_full = agg->mass;
                    const double cf_full = cf_agg ? cf_agg->mass : 0.0;
                    const double pr_cf_given_full = arm_posterior(p_cf, cf_full, p_base, own_full);
                    const double pr_base_given_full = 1.0 - pr_cf_given_full;
                    const double pr_base_given_ad = arm_posterior(p_base, own_ad, p_cf, cf_ad);
                    const double pr_cf_given_ad = 1.0 - pr_base_given_ad;
                    if (pr_base_given_full <= 0.0 || pr_cf_given_ad <= 0.0)
                        throw UndefinedConditional("treatment odds undefined at " + at);
                    next.wl *= (pr_cf_given_full / pr_base_given_full) *
                               (pr_base_given_ad / pr_cf_given_ad);
                }
            }

            // contribution of events at s = j
            double event_weight = next.wc * next.wl;
            if (d_form) {
                event_weight *= next.wmain;
            } else {
                const double hy_cf = hazard_y(cf, j, key, at);
                const double hy_base = hazard_y(base, j, key, at);
                event_weight *= next.wmain * (hy_cf / hy_base);
            }
            risk[js] += agg->c0d0y1 * event_weight;

            if (j < k) {
                Carry deeper = next;
                if (!d_form) {
                    const double s_cf = 1.0 - hazard_y(cf, j, key, at);
                    const double s_base = 1.0 - hazard_y(base, j, key, at);
                    if (s_base <= 0.0)
                        throw UndefinedConditional("survival factor zero at " + at);
                    deeper.wmain *= s_cf / s_base;
                }
                rec(j + 1, key, deeper);
            }
        }
    };
    rec(0, {}, Carry{});
    for (std::size_t i = 1; i < risk.size(); ++i) risk[i] += risk[i - 1];
    return risk[static_cast<std::size_t>(k)];  // masses are already arm-conditional
}

double exact_weighted_repr(const DgpSpec& dgp, int ay, int ad, int k, WeightedRepr which) {
    std::vector<std::string> all;
    for (const auto& c : dgp.covariates)
        if (!c.latent && c.timing == CovariateTiming::TimeVarying) all.push_back(c.name);
    return exact_weighted_repr(dgp, ay, ad, k, which, ReprForm::TreatmentOdds, all);
}

// ---------------------------------------------------------------------------
// Sensitivity

double oracle_sensitivity_t(const DgpSpec& dgp, int k, const HistKey& hist, int ay) {
    if (dgp.three_way) throw InvalidDgp("sensitivity offsets are defined for two-way models");
    if (k < 0 || k > dgp.horizon) throw IndexOutOfRange("k outside 0..K");
    const MeasuredLaw l0 = measured_regime_law(dgp, Regime{ay, 0, 0}, /*with_censoring=*/false);
    const MeasuredLaw l1 = measured_regime_law(dgp, Regime{ay, 1, 1}, /*with_censoring=*/false);
    auto hzd = [&](const MeasuredLaw& l) {
        auto it = l.at[static_cast<std::size_t>(k)].find(hist);
        if (it == l.at[static_cast<std::size_t>(k)].end() || it->second.c0d0 <= 0.0)
            throw UndefinedConditional("sensitivity hazard undefined");
        return it->second.c0d0y1 / it->second.c0d0;
    };
    return hzd(l0) - hzd(l1);
}

OracleSensitivityFn oracle_sensitivity_table(const DgpSpec& dgp) {
    auto table = std::make_shared<std::map<std::tuple<int, int, HistKey>, double>>();
    for (int ay = 0; ay <= 1; ++ay) {
        const MeasuredLaw l0 =
            measured_regime_law(dgp, Regime{ay, 0, 0}, /*with_censoring=*/false);
        const MeasuredLaw l1 =
            measured_regime_law(dgp, Regime{ay, 1, 1}, /*with_censoring=*/false);
        for (int k = 0; k <= dgp.horizon; ++k) {
            const auto ks = static_cast<std::size_t>(k);
            for (const auto& [key, agg0] : l0.at[ks]) {
                auto it = l1.at[ks].find(key);
                if (it == l1.at[ks].end()) continue;
                if (agg0.c0d0 <= 0.0 || it->second.c0d0 <= 0.0) continue;
                (*table)[{ay, k, key}] =
                    agg0.c0d0y1 / agg0.c0d0 - it->second.c0d0y1 / it->second.c0d0;
            }
        }
    }
    return [table](int k, const HistKey& hist, int ay) {
        auto it = table->find({ay, k, hist});
        return it == table->end() ? 0.0 : it->second;
    };
}

double exact_weighted_repr_dagger(const DgpSpec& dgp, int ay, int ad, int k,
                                  const OracleSensitivityFn& t) {
    if (dgp.three_way) throw InvalidDgp("two-way representation on a three-way specification");
    if (k < 0 || k > dgp.horizon) throw IndexOutOfRange("k outside 0..K");
    const bool cens = dgp.has_censoring();
    const BlockLayout blocks = BlockLayout::build(dgp, {});
    const LawIndex law_ay(measured_regime_law(dgp, Regime{ay, ay, ay}, cens), blocks);
    const LawIndex law_ad(measured_regime_law(dgp, Regime{ad, ad, ad}, cens), blocks);

    // offsets shift the a_Y-arm event probabilities toward the cross-world
    // regime; no shift is applied within a single arm
    const bool cross = ay != ad;
    const double sign_hazard = ad == 0 ? 1.0 : -1.0;
    const double sign_survival = -sign_hazard;

    std::vector<double> risk(static_cast<std::size_t>(k) + 1, 0.0);
    struct Carry {
        double wc = 1.0;
        double wsurv = 1.0;
    };
    std::function<void(int, const HistKey&, const Carry&)> rec = [&](int j, const HistKey& prefix,
                                                                     const Carry& carry) {
        if (j > k) return;
        const auto js = static_cast<std::size_t>(j);
        auto tails_it = law_ad.tails[js].find(prefix);
        if (tails_it == law_ad.tails[js].end()) return;
        for (const auto& tail : tails_it->second) {
            const HistKey key = concat(prefix, tail);
            const HistAgg* agg = law_ad.agg(j, key);
            if (agg == nullptr || agg->mass <= 0.0) continue;
            const std::string at = "k=" + std::to_string(j);
            Carry next = carry;
            next.wc /= surv_c(law_ad, j, key, at);

            double ratio = 1.0;
            if (cross) {
                const double hy_num = hazard_y(law_ay, j, key, at) + sign_hazard * t(j, key, ay);
                const double hy_den = hazard_y(law_ad, j, key, at);
                if (!(hy_num > 0.0 && hy_num < 1.0))
                    throw OffsetOutOfRange("offset-shifted hazard outside (0,1) at " + at);
                ratio = hy_num / hy_den;
            }
            risk[js] += agg->c0d0y1 * next.wc * next.wsurv * ratio;

            if (j < k) {
                Carry deeper = next;
                if (cross) {
                    const double s_num =
                        (1.0 - hazard_y(law_ay, j, key, at)) + sign_survival * t(j, key, ay);
                    const double s_den = 1.0 - hazard_y(law_ad, j, key, at);
                    if (!(s_num > 0.0 && s_num < 1.0))
                        throw OffsetOutOfRange("offset-shifted survival outside (0,1) at " + at);
                    deeper.wsurv *= s_num / s_den;
                }
                rec(j + 1, key, deeper);
            }
        }
    };
    rec(0, {}, Carry{});
    for (std::size_t i = 1; i < risk.size(); ++i) risk[i] += risk[i - 1];
    return risk[static_cast<std::size_t>(k)];
}

}  // namespace sepcr
