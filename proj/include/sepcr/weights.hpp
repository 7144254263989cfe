#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sepcr/event_history.hpp"
#include "sepcr/glm.hpp"

namespace sepcr {

// The multiplicative weight processes: censoring, competing-event,
// event-of-interest and covariate-block weights, per subject per interval,
// evaluated from fitted nuisance models.

struct NuisancePartition {
    // time-varying covariates on the A_D side; the rest form the A_Y side.
    // Baseline covariates sit on the A_D side of the within-interval order.
    std::vector<std::string> lad_block;

    bool ad_side(const CovariateSpec& spec) const;
    bool ay_block_empty(const CovariateSchema& schema) const;
    bool ad_block_empty(const CovariateSchema& schema) const;
};

struct NuisanceSet {
    std::optional<FittedModel> c_hazard;  // absent = no censoring in the data
    FittedModel d_hazard;
    FittedModel y_hazard;
    std::optional<FittedModel> a_given_lad_past;  // Pr(A | alive, L_{AD,k}, Lbar_{k-1})
    std::optional<FittedModel> a_given_past;      // Pr(A | alive, Lbar_{k-1})
    std::optional<FittedModel> a_given_full_l;    // Pr(A | alive, Lbar_k)
    NuisancePartition partition;
    std::vector<std::string> warnings;  // e.g. congeniality
};

struct NuisanceFormulas {
    std::string y_hazard;
    std::string d_hazard;
    std::optional<std::string> c_hazard;
    std::optional<std::string> a_given_lad_past;
    std::optional<std::string> a_given_past;
    std::optional<std::string> a_given_full_l;
    NuisancePartition partition;
};

NuisanceSet fit_nuisances(const EventHistoryDataset& ds, const NuisanceFormulas& formulas,
                          const FitOptions& opts = {});

// Offset for the event-of-interest hazard under the cross-world regime, as a
// function of the interval, the covariate history (records 0..k) and a_Y.
using SensitivityFunction =
    std::function<double(int k, std::span<const IntervalRecord> history, int ay)>;

struct WeightOptions {
    double epsilon_pos = 1e-6;  // any denominator probability below this raises PositivityBreach
};

class WeightEngine {
  public:
    WeightEngine(const EventHistoryDataset& ds, const NuisanceSet& ns, WeightOptions opts = {});

    // Cumulative censoring weight through s+1 for the given arm argument:
    // zero exactly on censored person-intervals.
    double w_c(std::size_t subject, int s, int arm) const;
    // Competing-event survival ratio through s: numerator arm a_D.
    double w_d(std::size_t subject, int s, int ay, int ad) const;
    // A_D-side covariate weight through s (treatment-model odds form).
    double w_lad(std::size_t subject, int s, int ay, int ad) const;
    // A_Y-side covariate weight through s.
    double w_lay(std::size_t subject, int s, int ad, int ay) const;
    // Event-of-interest weight: hazard ratio at s+1 times survival ratios
    // through s-1; numerator arm a_Y.
    double w_y(std::size_t subject, int s, int ad, int ay) const;
    // w_y with the offset-shifted numerator probabilities.
    double w_y_dagger(std::size_t subject, int s, int ad, int ay,
                      const SensitivityFunction& t) const;

    const EventHistoryDataset& dataset() const { return ds_; }
    const NuisanceSet& nuisances() const { return ns_; }

  private:
    const EventHistoryDataset& ds_;
    const NuisanceSet& ns_;
    WeightOptions opts_;

    double prob(const FittedModel& m, std::size_t subject, std::size_t record, int arm) const;
    double denom_checked(double p, const char* what) const;
    const Subject& subj(std::size_t i) const;
};

struct WeightTrace {
    std::string subject_id;
    // cumulative weights through each interval s (index into records)
    std::vector<double> w_c, w_d, w_lad, w_y, w_lay;
    std::vector<double> product_nu1;  // w_c * w_d * w_lad
    std::vector<double> product_nu2;  // w_c * w_y * w_lay
};

WeightTrace weight_trace(const WeightEngine& engine, std::size_t subject, int ay, int ad);

// CSV export: id,s,w_c,w_d,w_lad,w_y,w_lay,product.
std::string weight_traces_csv(const WeightEngine& engine, int ay, int ad, bool product_nu1);

}  // namespace sepcr
