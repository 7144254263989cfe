#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sepcr/event_history.hpp"

namespace sepcr {

// Pooled logistic models over person-interval records: discrete-time hazards
// for Y, D, C and treatment-assignment models for the covariate weights.

enum class OutcomeRole {
    YHazard,          // Pr(Y_{k+1}=1 | C_{k+1}=D_{k+1}=Y_k=0, ...)
    DHazard,          // Pr(D_{k+1}=1 | C_{k+1}=D_k=Y_k=0, ...)
    CHazard,          // Pr(C_{k+1}=1 | C_k=D_k=Y_k=0, ...)
    AModelGivenLAD,   // Pr(A=1 | alive at k, L_{AD,k}, Lbar_{k-1})
    AModelGivenPast,  // Pr(A=1 | alive at k, Lbar_{k-1})
    AModelGivenFullL  // Pr(A=1 | alive at k, Lbar_k)
};

enum class Lag { Current, Previous, Baseline };

struct Factor {
    enum class Kind { TimePower, Arm, Covariate };
    Kind kind = Kind::Covariate;
    int power = 1;          // k^power, or covariate value^power
    std::string cov;        // covariate name (Kind::Covariate)
    Lag lag = Lag::Current;
};

// One model term: a product of factors. Categorical covariates expand to
// one-hot columns dropping the first level.
struct Term {
    std::vector<Factor> factors;
    std::string label() const;
};

struct ModelFormula {
    OutcomeRole role = OutcomeRole::YHazard;
    int intercept_poly_degree = 0;  // columns k^0..k^degree, always first
    std::vector<Term> terms;        // in declaration order

    std::string to_string() const;
};

// Parses the formula mini-language, e.g.
//   polyk(3) + A + A:k + L0(*) + Lk(*) + Lk(*)^2 + Lk(*):k
//   strata(A) + polyk(3) + L0(*) + Lk(*)      (arm-stratified fit)
// Wildcards expand against the schema: L0(*) baseline covariates, Lk(*) and
// Lprev(*) time-varying covariates at the current / previous interval.
// strata(A) rewrites the formula with arm main effects and arm interactions
// on every column, which is the same maximum as fitting each arm separately.
ModelFormula parse_formula(const std::string& text, OutcomeRole role,
                           const CovariateSchema& schema);

struct DesignMatrix {
    std::size_t n = 0, p = 0;
    std::vector<double> x;  // row-major n*p
    std::vector<double> y;
    std::vector<std::string> names;

    double at(std::size_t i, std::size_t j) const { return x[i * p + j]; }
};

// Values available when evaluating a design row or a prediction.
struct PredictionContext {
    int k = 0;
    int arm = 0;
    const std::vector<double>* current = nullptr;
    const std::vector<double>* previous = nullptr;  // null at k=0
    const std::vector<double>* baseline = nullptr;
};

DesignMatrix build_design(const ModelFormula& formula, const CovariateSchema& schema,
                          const EventHistoryDataset& ds, const std::vector<RecordRef>& records);

struct FitOptions {
    double tolerance = 1e-8;  // max absolute score at convergence
    int max_iterations = 100;
    double separation_beta = 30.0;
    double ridge = 0.0;  // off by default
};

struct FittedModel {
    ModelFormula formula;
    std::vector<double> coefficients;
    std::vector<std::string> column_names;
    bool converged = false;
    int iterations = 0;
    double loglik = 0.0;
    double max_abs_score = 0.0;
    bool ridge_used = false;
};

FittedModel fit_pooled_logistic(const DesignMatrix& design, const FitOptions& opts = {});

// Convenience: risk set selection + design + fit for one nuisance role.
std::vector<RecordRef> records_for_role(const EventHistoryDataset& ds, OutcomeRole role);
FittedModel fit_model(const ModelFormula& formula, const EventHistoryDataset& ds,
                      const FitOptions& opts = {});

// Linear predictor row for a context; exposed for diagnostics.
std::vector<double> design_row(const ModelFormula& formula, const CovariateSchema& schema,
                               const PredictionContext& ctx);

// Predicted probability, strictly inside (0,1). The arm in ctx may be a
// counterfactual override; only arm-dependent columns change.
double predict_prob(const FittedModel& m, const CovariateSchema& schema,
                    const PredictionContext& ctx);

// Bernoulli log-likelihood and analytic score for a coefficient vector;
// used by the finite-difference gradient checks.
double bernoulli_loglik(const DesignMatrix& d, const std::vector<double>& beta);
std::vector<double> bernoulli_score(const DesignMatrix& d, const std::vector<double>& beta);

PredictionContext context_for(const EventHistoryDataset& ds, const RecordRef& ref,
                              std::optional<int> arm_override = std::nullopt);

}  // namespace sepcr
