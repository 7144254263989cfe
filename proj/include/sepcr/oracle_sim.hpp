#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sepcr/event_history.hpp"

namespace sepcr {

// Fully specified discrete laws for the component-randomized world, plus
// exact (enumeration-based) evaluation of counterfactual risks, the
// identification formula, and its weighted representations. Everything here
// is an independent check on the estimation modules: no fitted models, no
// sampling error.

struct DgpCovariate {
    std::string name;
    int cardinality = 2;
    CovariateTiming timing = CovariateTiming::TimeVarying;
    bool latent = false;  // drawn, conditioned on, never emitted
};

struct ParentRef {
    enum class Kind { AY, AD, AZ, Cov };
    Kind kind = Kind::Cov;
    std::string cov;
    int k = 0;
};

struct DgpTable {
    std::vector<ParentRef> parents;
    // parent values (in declaration order) -> probabilities; one entry for
    // event tables, `cardinality` entries for covariate tables
    std::map<std::vector<int>, std::vector<double>> rows;
};

enum class TrialDesign { TwoArm, FourArm };

struct DgpSpec {
    int horizon = 0;  // K
    TrialDesign design = TrialDesign::TwoArm;
    double arm_prob = 0.5;  // Pr(A=1) under the two-arm design
    std::vector<DgpCovariate> covariates;  // declaration order = draw order
    std::map<std::pair<std::string, int>, DgpTable> cov_tables;
    std::vector<std::optional<DgpTable>> c_tables;  // absent = no censoring
    std::vector<DgpTable> d_tables;
    std::vector<DgpTable> y_tables;
    bool three_way = false;  // some table conditions on a_Z

    void check() const;
    CovariateSchema measured_schema() const;
    bool has_censoring() const;
};

DgpSpec parse_dgp(const std::string& text);
DgpSpec load_dgp(const std::string& path);

struct Regime {
    int ay = 0;
    int ad = 0;
    int az = 0;  // read only by three-way tables
};

// --- simulation ---

EventHistoryDataset simulate(const DgpSpec& dgp, std::size_t n, std::uint64_t seed);

struct FourArmSubject {
    std::string id;
    int ay = 0;
    int ad = 0;
    int az = 0;
    std::vector<IntervalRecord> records;
};
struct FourArmDataset {
    CovariateSchema schema;
    int horizon = 0;
    bool three_way = false;
    std::vector<FourArmSubject> subjects;
};
FourArmDataset simulate_four_arm(const DgpSpec& dgp, std::size_t n, std::uint64_t seed);
std::string to_csv(const FourArmDataset& ds);

// Dataset whose empirical frequencies reproduce the two-arm observed law
// exactly: n_per_arm copies allocated proportionally to trajectory
// probabilities (which must come out integral).
EventHistoryDataset exact_dataset(const DgpSpec& dgp, std::size_t n_per_arm);

// --- exact measured-data law ---

// Aggregates of the measured-history process at each interval j under one
// regime: mass = Pr(alive and uncensored at j with this history),
// then successively * C_{j+1}=0, * D_{j+1}=0, * Y_{j+1}=1.
struct HistAgg {
    double mass = 0, c0 = 0, c0d0 = 0, c0d0y1 = 0;
};

using HistKey = std::vector<int>;  // measured covariate values through some j

struct MeasuredLaw {
    int horizon = 0;
    std::vector<int> per_interval_width;  // measured values recorded at each k
    std::vector<std::map<HistKey, HistAgg>> at;  // index j

    HistKey prefix_of(const HistKey& h, int j) const;  // values through j-1
    double prefix_mass(int j, const HistKey& prefix) const;
};

MeasuredLaw measured_regime_law(const DgpSpec& dgp, const Regime& r, bool with_censoring);

// --- exact functionals ---

// Pr(event of interest by k+1 under the regime, censoring eliminated).
double true_counterfactual_risk(const DgpSpec& dgp, const Regime& r, int k);
std::vector<double> true_counterfactual_risk_curve(const DgpSpec& dgp, const Regime& r);

// The identification formula evaluated on the two-arm observed law, with the
// time-varying covariates named in `lad_block` treated as the A_D-side block
// (the rest as the A_Y side). Defaults to everything on the A_D side.
double exact_gformula(const DgpSpec& dgp, int ay, int ad, int k,
                      const std::vector<std::string>& lad_block);
double exact_gformula(const DgpSpec& dgp, int ay, int ad, int k);

// Three-way variant: covariate law evaluated under the a_Z arm.
double exact_gformula_three_way(const DgpSpec& dgp, int ay, int ad, int az, int k);

enum class WeightedRepr { SumOverDWeights, SumOverYWeights };  // eq. with W_D / with W_Y
enum class ReprForm { TreatmentOdds, CovariateDensity };

double exact_weighted_repr(const DgpSpec& dgp, int ay, int ad, int k, WeightedRepr which,
                           ReprForm form, const std::vector<std::string>& lad_block);
double exact_weighted_repr(const DgpSpec& dgp, int ay, int ad, int k, WeightedRepr which);

// Sensitivity offset for the event-of-interest condition: the counterfactual
// hazard difference between the a_D arms, by enumeration.
using OracleSensitivityFn = std::function<double(int k, const HistKey& hist, int ay)>;
double oracle_sensitivity_t(const DgpSpec& dgp, int k, const HistKey& hist, int ay);
OracleSensitivityFn oracle_sensitivity_table(const DgpSpec& dgp);

// W_Y-side weighted representation with the offset-corrected event weight;
// restores the true risk when t is the oracle offset and the remaining
// conditions hold.
double exact_weighted_repr_dagger(const DgpSpec& dgp, int ay, int ad, int k,
                                  const OracleSensitivityFn& t);

}  // namespace sepcr
