#include "sepcr/glm.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace sepcr {

namespace {

std::string lag_suffix(Lag lag) {
    switch (lag) {
        case Lag::Current: return "@k";
        case Lag::Previous: return "@prev";
        case Lag::Baseline: return "@0";
    }
    return "";
}

std::string factor_label(const Factor& f) {
    switch (f.kind) {
        case Factor::Kind::Arm: return "A";
        case Factor::Kind::TimePower:
            return f.power == 1 ? "k" : "k^" + std::to_string(f.power);
        case Factor::Kind::Covariate: {
            std::string s = f.cov + lag_suffix(f.lag);
            if (f.power != 1) s += "^" + std::to_string(f.power);
            return s;
        }
    }
    return "?";
}

}  // namespace

std::string Term::label() const {
    std::string s;
    for (const auto& f : factors) {
        if (!s.empty()) s += ":";
        s += factor_label(f);
    }
    return s;
}

std::string ModelFormula::to_string() const {
    std::string s = "polyk(" + std::to_string(intercept_poly_degree) + ")";
    for (const auto& t : terms) s += " + " + t.label();
    return s;
}

// ---------------------------------------------------------------------------
// Formula parsing

namespace {

std::string strip(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_outside_parens(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    int depth = 0;
    for (char c : s) {
        if (c == '(') ++depth;
        if (c == ')') --depth;
        if (c == sep && depth == 0) {
            out.push_back(strip(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(strip(cur));
    return out;
}

int parse_int(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        int v = std::stoi(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("bad " + what + ": '" + s + "'");
    }
}

struct RawFactor {
    Factor factor;
    bool wildcard = false;
};

RawFactor parse_factor(const std::string& text) {
    RawFactor out;
    std::string s = text;
    int power = 1;
    auto caret = s.rfind('^');
    if (caret != std::string::npos && s.find(')', caret) == std::string::npos) {
        power = parse_int(strip(s.substr(caret + 1)), "exponent");
        s = strip(s.substr(0, caret));
    }
    if (power < 1 || power > 3) throw ConfigError("exponent must be 1..3 in '" + text + "'");

    if (s == "A") {
        out.factor.kind = Factor::Kind::Arm;
        if (power != 1) throw ConfigError("A takes no exponent");
        return out;
    }
    if (s == "k") {
        out.factor.kind = Factor::Kind::TimePower;
        out.factor.power = power;
        return out;
    }
    Lag lag;
    std::string inner;
    auto grab = [&s](const std::string& prefix) -> std::optional<std::string> {
        if (s.rfind(prefix, 0) == 0 && s.back() == ')')
            return strip(s.substr(prefix.size(), s.size() - prefix.size() - 1));
        return std::nullopt;
    };
    if (auto v = grab("L0(")) {
        lag = Lag::Baseline;
        inner = *v;
    } else if (auto v = grab("Lk(")) {
        lag = Lag::Current;
        inner = *v;
    } else if (auto v = grab("Lprev(")) {
        lag = Lag::Previous;
        inner = *v;
    } else {
        throw ConfigError("unrecognized formula factor '" + text + "'");
    }
    out.factor.kind = Factor::Kind::Covariate;
    out.factor.lag = lag;
    out.factor.power = power;
    if (inner == "*")
        out.wildcard = true;
    else
        out.factor.cov = inner;
    return out;
}

void expand_wildcards(const std::vector<RawFactor>& raw, const CovariateSchema& schema,
                      std::size_t i, std::vector<Factor>& prefix, std::vector<Term>& out) {
    if (i == raw.size()) {
        out.push_back(Term{prefix});
        return;
    }
    const RawFactor& rf = raw[i];
    if (rf.factor.kind != Factor::Kind::Covariate || !rf.wildcard) {
        prefix.push_back(rf.factor);
        expand_wildcards(raw, schema, i + 1, prefix, out);
        prefix.pop_back();
        return;
    }
    const bool want_baseline = rf.factor.lag == Lag::Baseline;
    for (const auto& e : schema.entries) {
        const bool is_baseline = e.timing == CovariateTiming::Baseline;
        if (is_baseline != want_baseline) continue;
        Factor f = rf.factor;
        f.cov = e.name;
        prefix.push_back(f);
        expand_wildcards(raw, schema, i + 1, prefix, out);
        prefix.pop_back();
    }
}

bool term_has_arm(const Term& t) {
    for (const auto& f : t.factors)
        if (f.kind == Factor::Kind::Arm) return true;
    return false;
}

}  // namespace

ModelFormula parse_formula(const std::string& text, OutcomeRole role,
                           const CovariateSchema& schema) {
    ModelFormula mf;
    mf.role = role;
    bool strata_arm = false;
    bool poly_seen = false;

    for (const std::string& chunk : split_outside_parens(text, '+')) {
        if (chunk.empty()) continue;
        if (chunk.rfind("polyk(", 0) == 0 && chunk.back() == ')') {
            if (poly_seen) throw ConfigError("polyk given twice");
            poly_seen = true;
            mf.intercept_poly_degree =
                parse_int(strip(chunk.substr(6, chunk.size() - 7)), "polyk degree");
            if (mf.intercept_poly_degree < 0) throw ConfigError("polyk degree must be >= 0");
            continue;
        }
        if (chunk == "strata(A)") {
            strata_arm = true;
            continue;
        }
        std::vector<RawFactor> raw;
        for (const std::string& fs : split_outside_parens(chunk, ':'))
            raw.push_back(parse_factor(fs));
        std::vector<Factor> prefix;
        expand_wildcards(raw, schema, 0, prefix, mf.terms);
    }

    for (const auto& t : mf.terms)
        for (const auto& f : t.factors)
            if (f.kind == Factor::Kind::Covariate) {
                int idx = schema.index_of(f.cov);
                if (idx < 0) throw UnknownCovariate("formula references unknown covariate " + f.cov);
                if (schema.entries[idx].kind == CovariateKind::Categorical && f.power != 1)
                    throw ConfigError("categorical covariate " + f.cov + " takes no exponent");
            }

    const bool a_model = role == OutcomeRole::AModelGivenLAD || role == OutcomeRole::AModelGivenPast ||
                         role == OutcomeRole::AModelGivenFullL;
    if (a_model) {
        if (strata_arm) throw ConfigError("strata(A) is not allowed in a treatment model");
        for (const auto& t : mf.terms)
            if (term_has_arm(t)) throw ConfigError("treatment models may not include A terms");
    }

    if (strata_arm) {
        // Arm-stratified fit: arm main effect, arm-specific time intercepts,
        // and an arm interaction on every declared term. Same maximum as two
        // separate per-arm fits.
        for (const auto& t : mf.terms)
            if (term_has_arm(t))
                throw ConfigError("strata(A) cannot be combined with explicit A terms");
        std::vector<Term> expanded;
        Factor arm{Factor::Kind::Arm, 1, "", Lag::Current};
        expanded.push_back(Term{{arm}});
        for (int p = 1; p <= mf.intercept_poly_degree; ++p)
            expanded.push_back(Term{{arm, Factor{Factor::Kind::TimePower, p, "", Lag::Current}}});
        for (const auto& t : mf.terms) {
            expanded.push_back(t);
            Term it;
            it.factors.push_back(arm);
            it.factors.insert(it.factors.end(), t.factors.begin(), t.factors.end());
            expanded.push_back(it);
        }
        mf.terms = std::move(expanded);
    }
    return mf;
}

// ---------------------------------------------------------------------------
// Design expansion

namespace {

struct ExpandedFactor {
    Factor::Kind kind;
    int power;
    int cov_index;  // into schema.entries
    Lag lag;
    int level;  // categorical one-hot level, -1 for numeric
};

struct ExpandedColumn {
    std::vector<ExpandedFactor> factors;  // empty + poly handled separately
    std::string name;
};

std::vector<ExpandedColumn> expand_columns(const ModelFormula& mf, const CovariateSchema& schema) {
    std::vector<ExpandedColumn> cols;
    for (int p = 0; p <= mf.intercept_poly_degree; ++p) {
        ExpandedColumn c;
        if (p > 0) c.factors.push_back({Factor::Kind::TimePower, p, -1, Lag::Current, -1});
        c.name = p == 0 ? "(intercept)" : (p == 1 ? "k" : "k^" + std::to_string(p));
        cols.push_back(std::move(c));
    }
    for (const auto& term : mf.terms) {
        std::vector<ExpandedColumn> partial(1);
        for (const auto& f : term.factors) {
            std::vector<ExpandedColumn> next;
            if (f.kind == Factor::Kind::Covariate) {
                int idx = schema.index_of(f.cov);
                if (idx < 0) throw UnknownCovariate("unknown covariate " + f.cov);
                const auto& spec = schema.entries[idx];
                if (spec.kind == CovariateKind::Categorical) {
                    for (int lvl = 1; lvl < spec.cardinality; ++lvl) {
                        for (auto c : partial) {
                            c.factors.push_back({f.kind, 1, idx, f.lag, lvl});
                            c.name += (c.name.empty() ? "" : ":") + factor_label(f) + "[" +
                                      std::to_string(lvl) + "]";
                            next.push_back(std::move(c));
                        }
                    }
                } else {
                    for (auto c : partial) {
                        c.factors.push_back({f.kind, f.power, idx, f.lag, -1});
                        c.name += (c.name.empty() ? "" : ":") + factor_label(f);
                        next.push_back(std::move(c));
                    }
                }
            } else {
                for (auto c : partial) {
                    c.factors.push_back({f.kind, f.power, -1, f.lag, -1});
                    c.name += (c.name.empty() ? "" : ":") + factor_label(f);
                    next.push_back(std::move(c));
                }
            }
            partial = std::move(next);
        }
        cols.insert(cols.end(), partial.begin(), partial.end());
    }
    return cols;
}

double factor_value(const ExpandedFactor& f, const PredictionContext& ctx) {
    switch (f.kind) {
        case Factor::Kind::Arm:
            return static_cast<double>(ctx.arm);
        case Factor::Kind::TimePower: {
            double v = 1.0;
            for (int i = 0; i < f.power; ++i) v *= ctx.k;
            return v;
        }
        case Factor::Kind::Covariate: {
            const std::vector<double>* src = nullptr;
            switch (f.lag) {
                case Lag::Current: src = ctx.current; break;
                case Lag::Previous: src = ctx.previous; break;  // null at k=0
                case Lag::Baseline: src = ctx.baseline; break;
            }
            if (src == nullptr) return 0.0;  // previous lag has no value at baseline
            double v = (*src)[static_cast<std::size_t>(f.cov_index)];
            if (f.level >= 0) return v == f.level ? 1.0 : 0.0;
            double out = 1.0;
            for (int i = 0; i < f.power; ++i) out *= v;
            return out;
        }
    }
    return 0.0;
}

double row_value(const std::vector<ExpandedFactor>& factors, const PredictionContext& ctx) {
    double v = 1.0;
    for (const auto& f : factors) v *= factor_value(f, ctx);
    return v;
}

double outcome_for(const EventHistoryDataset& ds, OutcomeRole role, const RecordRef& ref) {
    const auto& s = ds.subjects[ref.subject];
    const auto& r = s.records[ref.record];
    switch (role) {
        case OutcomeRole::YHazard: return r.y_next;
        case OutcomeRole::DHazard: return r.d_next;
        case OutcomeRole::CHazard: return r.c_next;
        default: return s.arm;
    }
}

}  // namespace

PredictionContext context_for(const EventHistoryDataset& ds, const RecordRef& ref,
                              std::optional<int> arm_override) {
    const auto& s = ds.subjects[ref.subject];
    const auto& r = s.records[ref.record];
    PredictionContext ctx;
    ctx.k = r.k;
    ctx.arm = arm_override.value_or(s.arm);
    ctx.current = &r.l;
    ctx.previous = ref.record > 0 ? &s.records[ref.record - 1].l : nullptr;
    ctx.baseline = &s.records.front().l;
    return ctx;
}

std::vector<double> design_row(const ModelFormula& formula, const CovariateSchema& schema,
                               const PredictionContext& ctx) {
    const auto cols = expand_columns(formula, schema);
    std::vector<double> row(cols.size());
    for (std::size_t j = 0; j < cols.size(); ++j) row[j] = row_value(cols[j].factors, ctx);
    return row;
}

DesignMatrix build_design(const ModelFormula& formula, const CovariateSchema& schema,
                          const EventHistoryDataset& ds, const std::vector<RecordRef>& records) {
    if (records.empty()) throw EmptyRiskSet("no person-intervals for " + formula.to_string());
    const auto cols = expand_columns(formula, schema);
    DesignMatrix d;
    d.n = records.size();
    d.p = cols.size();
    d.x.resize(d.n * d.p);
    d.y.resize(d.n);
    d.names.reserve(cols.size());
    for (const auto& c : cols) d.names.push_back(c.name);
    for (std::size_t i = 0; i < records.size(); ++i) {
        const PredictionContext ctx = context_for(ds, records[i]);
        for (std::size_t j = 0; j < cols.size(); ++j)
            d.x[i * d.p + j] = row_value(cols[j].factors, ctx);
        const double y = outcome_for(ds, formula.role, records[i]);
        if (y != 0.0 && y != 1.0)
            throw MalformedRow("outcome not in {0,1} in risk set for " + formula.to_string());
        d.y[i] = y;
    }
    return d;
}

std::vector<RecordRef> records_for_role(const EventHistoryDataset& ds, OutcomeRole role) {
    switch (role) {
        case OutcomeRole::YHazard: return risk_set_all(ds, RiskSetKind::YHazard);
        case OutcomeRole::DHazard: return risk_set_all(ds, RiskSetKind::DHazard);
        default: return risk_set_all(ds, RiskSetKind::CHazard);
    }
}

// ---------------------------------------------------------------------------
// Newton-Raphson fit

namespace {

double softplus(double eta) {
    return std::max(eta, 0.0) + std::log1p(std::exp(-std::fabs(eta)));
}

double expit(double eta) { return 1.0 / (1.0 + std::exp(-eta)); }

// Solves the symmetric positive definite system a * x = b in place.
// a is p*p row-major; throws SingularInformation on rank deficiency.
std::vector<double> solve_spd(std::vector<double> a, std::vector<double> b, std::size_t p) {
    double max_diag = 0.0;
    for (std::size_t i = 0; i < p; ++i) max_diag = std::max(max_diag, std::fabs(a[i * p + i]));
    const double tol = std::max(max_diag, 1.0) * 1e-12;
    // Cholesky a = L L'
    for (std::size_t j = 0; j < p; ++j) {
        double d = a[j * p + j];
        for (std::size_t t = 0; t < j; ++t) d -= a[j * p + t] * a[j * p + t];
        if (!(d > tol)) throw SingularInformation("information matrix is singular");
        d = std::sqrt(d);
        a[j * p + j] = d;
        for (std::size_t i = j + 1; i < p; ++i) {
            double v = a[i * p + j];
            for (std::size_t t = 0; t < j; ++t) v -= a[i * p + t] * a[j * p + t];
            a[i * p + j] = v / d;
        }
    }
    // forward then back substitution
    for (std::size_t i = 0; i < p; ++i) {
        double v = b[i];
        for (std::size_t t = 0; t < i; ++t) v -= a[i * p + t] * b[t];
        b[i] = v / a[i * p + i];
    }
    for (std::size_t ii = p; ii-- > 0;) {
        double v = b[ii];
        for (std::size_t t = ii + 1; t < p; ++t) v -= a[t * p + ii] * b[t];
        b[ii] = v / a[ii * p + ii];
    }
    return b;
}

}  // namespace

double bernoulli_loglik(const DesignMatrix& d, const std::vector<double>& beta) {
    long double ll = 0.0;
    for (std::size_t i = 0; i < d.n; ++i) {
        double eta = 0.0;
        for (std::size_t j = 0; j < d.p; ++j) eta += d.at(i, j) * beta[j];
        ll += d.y[i] * eta - softplus(eta);
    }
    return static_cast<double>(ll);
}

std::vector<double> bernoulli_score(const DesignMatrix& d, const std::vector<double>& beta) {
    std::vector<long double> acc(d.p, 0.0L);
    for (std::size_t i = 0; i < d.n; ++i) {
        double eta = 0.0;
        for (std::size_t j = 0; j < d.p; ++j) eta += d.at(i, j) * beta[j];
        const double resid = d.y[i] - expit(eta);
        for (std::size_t j = 0; j < d.p; ++j) acc[j] += d.at(i, j) * resid;
    }
    std::vector<double> s(d.p);
    for (std::size_t j = 0; j < d.p; ++j) s[j] = static_cast<double>(acc[j]);
    return s;
}

FittedModel fit_pooled_logistic(const DesignMatrix& design, const FitOptions& opts) {
    if (design.n == 0) throw EmptyRiskSet("empty design");
    const std::size_t p = design.p;
    FittedModel m;
    m.column_names = design.names;
    m.coefficients.assign(p, 0.0);
    m.ridge_used = opts.ridge > 0.0;

    auto penalized_ll = [&](const std::vector<double>& beta) {
        double ll = bernoulli_loglik(design, beta);
        if (opts.ridge > 0.0)
            for (double b : beta) ll -= 0.5 * opts.ridge * b * b;
        return ll;
    };

    double ll = penalized_ll(m.coefficients);
    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        // score and information at the current coefficients; extended
        // precision keeps the attainable score floor well under tolerance
        std::vector<long double> score_acc(p, 0.0L);
        std::vector<long double> info_acc(p * p, 0.0L);
        for (std::size_t i = 0; i < design.n; ++i) {
            double eta = 0.0;
            for (std::size_t j = 0; j < p; ++j) eta += design.at(i, j) * m.coefficients[j];
            const double mu = expit(eta);
            const double w = mu * (1.0 - mu);
            const double resid = design.y[i] - mu;
            for (std::size_t j = 0; j < p; ++j) {
                score_acc[j] += design.at(i, j) * resid;
                for (std::size_t t = 0; t <= j; ++t)
                    info_acc[j * p + t] += w * design.at(i, j) * design.at(i, t);
            }
        }
        std::vector<double> score(p), info(p * p);
        for (std::size_t j = 0; j < p; ++j) score[j] = static_cast<double>(score_acc[j]);
        for (std::size_t j = 0; j < p; ++j)
            for (std::size_t t = 0; t <= j; ++t) {
                info[j * p + t] = static_cast<double>(info_acc[j * p + t]);
                info[t * p + j] = info[j * p + t];
            }
        if (opts.ridge > 0.0)
            for (std::size_t j = 0; j < p; ++j) {
                score[j] -= opts.ridge * m.coefficients[j];
                info[j * p + j] += opts.ridge;
            }

        double max_score = 0.0;
        for (double s : score) max_score = std::max(max_score, std::fabs(s));
        m.max_abs_score = max_score;
        m.iterations = iter;
        if (max_score <= opts.tolerance) {
            // a vanishing score with every observation classified to its
            // outcome means the maximum does not exist
            if (opts.ridge == 0.0) {
                double worst_resid = 0.0;
                for (std::size_t i = 0; i < design.n; ++i) {
                    double eta = 0.0;
                    for (std::size_t j = 0; j < p; ++j)
                        eta += design.at(i, j) * m.coefficients[j];
                    worst_resid = std::max(worst_resid, std::fabs(design.y[i] - expit(eta)));
                }
                if (worst_resid < 1e-3)
                    throw Separation("outcomes are perfectly classified; the maximum is not attained");
            }
            m.converged = true;
            m.loglik = bernoulli_loglik(design, m.coefficients);
            return m;
        }

        double max_beta = 0.0;
        for (double b : m.coefficients) max_beta = std::max(max_beta, std::fabs(b));
        if (max_beta > opts.separation_beta)
            throw Separation("coefficients diverging (|beta| > " +
                             format_double(opts.separation_beta) + " with score " +
                             format_double(max_score) + ")");

        std::vector<double> step = solve_spd(info, score, p);
        // step-halving keeps the likelihood ascending; the slack tracks the
        // rounding noise of a log-likelihood of this magnitude
        const double slack = 1e-12 * (1.0 + std::fabs(ll));
        double scale = 1.0;
        bool accepted = false;
        for (int h = 0; h < 40; ++h) {
            std::vector<double> cand = m.coefficients;
            bool finite = true;
            for (std::size_t j = 0; j < p; ++j) {
                cand[j] += scale * step[j];
                if (!std::isfinite(cand[j])) finite = false;
            }
            const double cand_ll = finite ? penalized_ll(cand) : -HUGE_VAL;
            if (cand_ll >= ll - slack) {
                m.coefficients = std::move(cand);
                ll = cand_ll;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if (!accepted) {
            // step-halving exhausted without ascent: give up where we stand
            m.converged = false;
            m.loglik = bernoulli_loglik(design, m.coefficients);
            return m;
        }
    }
    throw NonConvergence("pooled logistic fit hit the iteration cap (" +
                         std::to_string(opts.max_iterations) + ")");
}

FittedModel fit_model(const ModelFormula& formula, const EventHistoryDataset& ds,
                      const FitOptions& opts) {
    const auto records = records_for_role(ds, formula.role);
    const DesignMatrix d = build_design(formula, ds.schema, ds, records);
    FittedModel m = fit_pooled_logistic(d, opts);
    m.formula = formula;
    return m;
}

double predict_prob(const FittedModel& m, const CovariateSchema& schema,
                    const PredictionContext& ctx) {
    if (!m.converged) throw NotConverged("predict_prob on an unconverged model");
    const auto row = design_row(m.formula, schema, ctx);
    double eta = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) eta += row[j] * m.coefficients[j];
    double p = expit(eta);
    // keep strictly inside (0,1); positivity checks handle near-zero values
    p = std::min(std::max(p, 1e-15), 1.0 - 1e-15);
    return p;
}

}  // namespace sepcr
