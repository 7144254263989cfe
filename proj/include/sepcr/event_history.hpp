#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sepcr/errors.hpp"

namespace sepcr {

// Discrete-time competing-events data in long format. One record per
// person-interval k, carrying the within-interval covariates L_k and the
// next-interval outcomes (C_{k+1}, D_{k+1}, Y_{k+1}).

enum class CovariateKind { Binary, Categorical, Continuous };
enum class CovariateTiming { Baseline, TimeVarying };

struct CovariateSpec {
    std::string name;
    CovariateKind kind = CovariateKind::Binary;
    int cardinality = 2;  // categorical only
    CovariateTiming timing = CovariateTiming::TimeVarying;
};

struct CovariateSchema {
    std::vector<CovariateSpec> entries;

    int index_of(const std::string& name) const;  // -1 if absent
    bool has_continuous() const;
    void check() const;  // unique names, cardinality >= 2
};

// Outcome cell: 0, 1, or missing (encoded -1). Missingness follows the
// long-format preparation rules: censoring blanks d/y, a competing event
// blanks y.
using Outcome = int8_t;
constexpr Outcome kMissing = -1;

struct IntervalRecord {
    int k = 0;
    Outcome c_next = 0;
    Outcome d_next = 0;
    Outcome y_next = 0;
    std::vector<double> l;  // aligned with schema.entries
};

struct Subject {
    std::string id;
    int arm = 0;  // point treatment, constant over follow-up
    std::vector<IntervalRecord> records;  // sorted by k
};

struct ValidationFinding {
    std::string rule;  // e.g. RecordAfterTerminal, GapInFollowUp
    std::string subject_id;
    int k = -1;
    std::string detail;
};

struct ValidationReport {
    std::vector<ValidationFinding> findings;
    bool clean() const;  // no findings other than informational notes
    std::string to_string() const;
};

struct EventHistoryDataset {
    CovariateSchema schema;
    int horizon = 0;  // K; outcomes observed through K+1
    std::vector<Subject> subjects;
    int dropped_beyond_horizon = 0;  // rows with k > K discarded at load

    std::size_t n_subjects() const { return subjects.size(); }
    std::size_t n_records() const;
    std::size_t n_in_arm(int a) const;
};

// Reference to one person-interval.
struct RecordRef {
    std::size_t subject = 0;
    std::size_t record = 0;
};

enum class RiskSetKind { CHazard, DHazard, YHazard };

// --- operations ---

EventHistoryDataset load_long_csv(const std::string& path, const CovariateSchema& schema,
                                  int horizon);
void save_long_csv(const EventHistoryDataset& ds, const std::string& path);
std::string to_csv(const EventHistoryDataset& ds);
EventHistoryDataset from_csv_text(const std::string& text, const CovariateSchema& schema,
                                  int horizon);

ValidationReport validate(const EventHistoryDataset& ds);

// Person-intervals eligible for the conditional probability of the given
// hazard at interval k. Nested: YHazard subset of DHazard subset of CHazard.
std::vector<RecordRef> risk_set(const EventHistoryDataset& ds, int k, RiskSetKind kind);

// All person-intervals eligible for the given hazard at any k <= horizon.
std::vector<RecordRef> risk_set_all(const EventHistoryDataset& ds, RiskSetKind kind);

std::string format_double(double v);  // shortest round-trip decimal form

}  // namespace sepcr
