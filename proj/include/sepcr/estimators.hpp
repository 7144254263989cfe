#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sepcr/event_history.hpp"
#include "sepcr/weights.hpp"

namespace sepcr {

// Risk-curve estimators: the plug-in identification formula with saturated
// empirical conditionals, the two weighted estimators, the offset-corrected
// sensitivity estimator, the censoring-weighted cumulative incidence, effect
// contrasts and the subject-level bootstrap.

enum class EstimatorTag { Nu1, Nu2, Nu2Dagger, GFormula, AalenJohansen };
std::string to_string(EstimatorTag t);

enum class Cause { EventOfInterest, CompetingEvent };

struct RegimeSpec {
    int ay = 0;
    int ad = 0;
    std::optional<int> az;
    std::string to_string() const;
};

struct RiskCurve {
    RegimeSpec regime;
    EstimatorTag tag = EstimatorTag::Nu2;
    std::optional<Cause> cause;  // censoring-weighted incidence curves only
    std::vector<double> values;  // index k: Pr(event by k+1), raw
    std::vector<double> ci_low, ci_high;  // filled by the bootstrap wrappers

    // Reporting form: monotone non-decreasing, clamped to [0,1]. Raw values
    // stay in `values`; clipping never feeds back into estimation.
    std::vector<double> clipped() const;
    bool needs_clipping() const;
};

// --- plug-in identification formula (saturated empirical conditionals) ---

struct GFormulaOptions {
    // time-varying covariates on the A_D side; the rest on the A_Y side
    std::vector<std::string> lad_block;
};

RiskCurve gformula_plugin(const EventHistoryDataset& ds, int ay, int ad, int K,
                          const GFormulaOptions& opts = {});

// Three-way treatment split: the covariate law is evaluated under the a_Z
// arm and the full covariate density is used (no block split).
RiskCurve gformula_three_way(const EventHistoryDataset& ds, int ay, int ad, int az, int K);

// --- weighted estimators ---

struct EstimatorOptions {
    WeightOptions weights;
    std::optional<double> truncate_percentile;  // optional weight cap, off by default
};

RiskCurve estimate_nu1(const EventHistoryDataset& ds, const NuisanceSet& ns, int ay, int ad,
                       int K, const EstimatorOptions& opts = {});
RiskCurve estimate_nu2(const EventHistoryDataset& ds, const NuisanceSet& ns, int ay, int ad,
                       int K, const EstimatorOptions& opts = {});
RiskCurve estimate_nu2_dagger(const EventHistoryDataset& ds, const NuisanceSet& ns, int ay,
                              int ad, int K, const SensitivityFunction& t,
                              const EstimatorOptions& opts = {});

// --- censoring-weighted cumulative incidence ---

// Censoring survival probabilities for the weight denominators: none (no
// censoring), a fitted hazard model, or the saturated empirical law.
class CensorModel {
  public:
    static CensorModel none();
    static CensorModel fitted(FittedModel model);
    static CensorModel empirical(const EventHistoryDataset& ds);

    // Pr(C_{k+1} = 0 | history, own arm) for one person-interval
    double surv_prob(const EventHistoryDataset& ds, const RecordRef& ref) const;

  private:
    std::optional<FittedModel> fitted_;
    // (arm, k, history) -> (at-risk count, uncensored count)
    std::map<std::tuple<int, int, std::vector<int>>, std::pair<double, double>> table_;
    bool empirical_ = false;
};

RiskCurve ipcw_aalen_johansen(const EventHistoryDataset& ds, const CensorModel& censoring,
                              Cause cause, int arm, int K, double epsilon_pos = 1e-6);

// --- contrasts ---

struct EffectEstimate {
    enum class Kind { Total, AYSeparable, ADSeparable };
    Kind kind = Kind::Total;
    int fixed_arm = -1;  // a_D for the A_Y effect, a_Y for the A_D effect
    EstimatorTag tag = EstimatorTag::Nu2;
    std::vector<double> point;
    std::vector<double> ci_low, ci_high;
    int resamples = 0;
    std::string label() const;
};

// All contrasts computable from the given curves (which must share an
// estimator tag and horizon): the total effect and the separable effects at
// each available fixed arm.
std::vector<EffectEstimate> effect_contrasts(const std::vector<RiskCurve>& curves);

// --- bootstrap ---

using CurveEstimator = std::function<std::vector<double>(const EventHistoryDataset&)>;

struct BootstrapResult {
    std::vector<double> point;  // estimate on the full data
    std::vector<double> ci_low, ci_high;  // percentile 2.5 / 97.5 per k
    int resamples = 0;
    int failed = 0;
};

// Subject-level resampling with replacement; the estimator re-fits its
// nuisance models on every resample. Deterministic given the seed
// (resample i uses seed + i) regardless of thread count. Failing resamples
// are skipped and counted; more than 10% failures aborts.
BootstrapResult bootstrap_ci(const EventHistoryDataset& ds, const CurveEstimator& estimator,
                             int B, std::uint64_t seed, int threads = 1);

EventHistoryDataset resample_subjects(const EventHistoryDataset& ds, std::uint64_t seed);

// --- reporting ---

std::string results_csv(const std::vector<RiskCurve>& curves,
                        const std::vector<EffectEstimate>& effects);

}  // namespace sepcr
