#include "sepcr/event_history.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace sepcr {

int CovariateSchema::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < entries.size(); ++i)
        if (entries[i].name == name) return static_cast<int>(i);
    return -1;
}

bool CovariateSchema::has_continuous() const {
    for (const auto& e : entries)
        if (e.kind == CovariateKind::Continuous) return true;
    return false;
}

void CovariateSchema::check() const {
    std::set<std::string> seen;
    for (const auto& e : entries) {
        if (e.name.empty()) throw SchemaMismatch("covariate with empty name");
        if (!seen.insert(e.name).second)
            throw SchemaMismatch("duplicate covariate name: " + e.name);
        if (e.kind == CovariateKind::Categorical && e.cardinality < 2)
            throw SchemaMismatch("categorical cardinality < 2 for " + e.name);
    }
}

bool ValidationReport::clean() const {
    for (const auto& f : findings)
        if (f.rule != "DroppedBeyondHorizon") return false;
    return true;
}

std::string ValidationReport::to_string() const {
    std::ostringstream os;
    for (const auto& f : findings) {
        os << f.rule << " subject=" << f.subject_id;
        if (f.k >= 0) os << " k=" << f.k;
        if (!f.detail.empty()) os << " (" << f.detail << ")";
        os << "\n";
    }
    return os.str();
}

std::size_t EventHistoryDataset::n_records() const {
    std::size_t n = 0;
    for (const auto& s : subjects) n += s.records.size();
    return n;
}

std::size_t EventHistoryDataset::n_in_arm(int a) const {
    std::size_t n = 0;
    for (const auto& s : subjects) n += (s.arm == a) ? 1 : 0;
    return n;
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

Outcome parse_outcome(const std::string& cell, const std::string& what, std::size_t lineno) {
    if (cell.empty()) return kMissing;
    if (cell == "0") return 0;
    if (cell == "1") return 1;
    throw MalformedRow("line " + std::to_string(lineno) + ": bad " + what + " value '" + cell +
                       "'");
}

double parse_number(const std::string& cell, std::size_t lineno) {
    double v = 0;
    auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size())
        throw MalformedRow("line " + std::to_string(lineno) + ": unparseable cell '" + cell + "'");
    return v;
}

void check_missingness(const IntervalRecord& r, const std::string& sid) {
    // Within-interval order (C,D,Y): censoring blanks d and y; a competing
    // event blanks y; otherwise nothing is missing.
    const bool ok = (r.c_next == 1) ? (r.d_next == kMissing && r.y_next == kMissing)
                    : (r.c_next == 0 && r.d_next == 1)
                        ? (r.y_next == kMissing)
                        : (r.c_next == 0 && r.d_next == 0 && r.y_next != kMissing);
    if (!ok)
        throw MalformedRow("subject " + sid + " k=" + std::to_string(r.k) +
                           ": outcome missingness violates the long-format rules");
}

void check_covariate_value(const CovariateSpec& spec, double v, const std::string& sid, int k) {
    if (!std::isfinite(v))
        throw MalformedRow("subject " + sid + " k=" + std::to_string(k) + ": non-finite value for " +
                           spec.name);
    if (spec.kind == CovariateKind::Continuous) return;
    const int card = spec.kind == CovariateKind::Binary ? 2 : spec.cardinality;
    const double r = std::round(v);
    if (r != v || v < 0 || v >= card)
        throw MalformedRow("subject " + sid + " k=" + std::to_string(k) + ": value " +
                           format_double(v) + " out of range for " + spec.name);
}

}  // namespace

EventHistoryDataset from_csv_text(const std::string& text, const CovariateSchema& schema,
                                  int horizon) {
    schema.check();
    if (horizon < 0) throw IndexOutOfRange("horizon must be >= 0");

    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw SchemaMismatch("empty file");

    const std::vector<std::string> header = split_csv_line(line);
    std::vector<std::string> expected = {"id", "k", "a", "c_next", "d_next", "y_next"};
    for (const auto& e : schema.entries) expected.push_back(e.name);
    if (header != expected) {
        std::string want;
        for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
        std::string got;
        for (const auto& h : header) got += (got.empty() ? "" : ",") + h;
        throw SchemaMismatch("header mismatch: expected '" + want + "', got '" + got + "'");
    }

    EventHistoryDataset ds;
    ds.schema = schema;
    ds.horizon = horizon;

    std::map<std::string, std::size_t> index;  // id -> subjects slot
    std::set<std::pair<std::string, int>> seen_intervals;

    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != expected.size())
            throw MalformedRow("line " + std::to_string(lineno) + ": expected " +
                               std::to_string(expected.size()) + " cells, got " +
                               std::to_string(cells.size()));

        const std::string& id = cells[0];
        if (id.empty()) throw MalformedRow("line " + std::to_string(lineno) + ": empty id");

        IntervalRecord rec;
        const double kval = parse_number(cells[1], lineno);
        if (kval < 0 || std::round(kval) != kval)
            throw MalformedRow("line " + std::to_string(lineno) + ": bad interval index");
        rec.k = static_cast<int>(kval);

        const double aval = parse_number(cells[2], lineno);
        if (aval != 0 && aval != 1)
            throw MalformedRow("line " + std::to_string(lineno) + ": arm must be 0 or 1");

        rec.c_next = parse_outcome(cells[3], "c_next", lineno);
        if (rec.c_next == kMissing)
            throw MalformedRow("line " + std::to_string(lineno) + ": c_next may not be missing");
        rec.d_next = parse_outcome(cells[4], "d_next", lineno);
        rec.y_next = parse_outcome(cells[5], "y_next", lineno);
        check_missingness(rec, id);

        rec.l.resize(schema.entries.size());
        for (std::size_t j = 0; j < schema.entries.size(); ++j) {
            if (cells[6 + j].empty())
                throw MalformedRow("line " + std::to_string(lineno) + ": missing covariate " +
                                   schema.entries[j].name);
            rec.l[j] = parse_number(cells[6 + j], lineno);
            check_covariate_value(schema.entries[j], rec.l[j], id, rec.k);
        }

        if (rec.k > horizon) {
            ++ds.dropped_beyond_horizon;  // covariates past K carry no information here
            continue;
        }

        if (!seen_intervals.insert({id, rec.k}).second)
            throw DuplicateInterval("subject " + id + " has two records at k=" +
                                    std::to_string(rec.k));

        auto it = index.find(id);
        if (it == index.end()) {
            index.emplace(id, ds.subjects.size());
            ds.subjects.push_back(Subject{id, static_cast<int>(aval), {}});
            it = index.find(id);
        } else if (ds.subjects[it->second].arm != static_cast<int>(aval)) {
            throw MalformedRow("subject " + id + ": arm changes over follow-up");
        }
        ds.subjects[it->second].records.push_back(std::move(rec));
    }

    for (auto& s : ds.subjects)
        std::sort(s.records.begin(), s.records.end(),
                  [](const IntervalRecord& x, const IntervalRecord& y) { return x.k < y.k; });
    return ds;
}

EventHistoryDataset load_long_csv(const std::string& path, const CovariateSchema& schema,
                                  int horizon) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_csv_text(ss.str(), schema, horizon);
}

std::string to_csv(const EventHistoryDataset& ds) {
    std::ostringstream os;
    os << "id,k,a,c_next,d_next,y_next";
    for (const auto& e : ds.schema.entries) os << "," << e.name;
    os << "\n";
    auto cell = [](Outcome v) { return v == kMissing ? std::string() : std::to_string(int(v)); };
    for (const auto& s : ds.subjects) {
        for (const auto& r : s.records) {
            os << s.id << "," << r.k << "," << s.arm << "," << cell(r.c_next) << ","
               << cell(r.d_next) << "," << cell(r.y_next);
            for (double v : r.l) os << "," << format_double(v);
            os << "\n";
        }
    }
    return os.str();
}

void save_long_csv(const EventHistoryDataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << to_csv(ds);
}

ValidationReport validate(const EventHistoryDataset& ds) {
    ValidationReport rep;
    auto add = [&rep](const std::string& rule, const std::string& sid, int k,
                      const std::string& detail = "") {
        rep.findings.push_back({rule, sid, k, detail});
    };

    if (ds.dropped_beyond_horizon > 0)
        add("DroppedBeyondHorizon", "*", -1,
            std::to_string(ds.dropped_beyond_horizon) + " rows past the horizon were dropped");

    for (const auto& s : ds.subjects) {
        if (s.arm != 0 && s.arm != 1) add("BadArm", s.id, -1);
        if (s.records.empty()) {
            add("NoRecords", s.id, -1);
            continue;
        }
        if (s.records.front().k != 0) add("NoBaselineInterval", s.id, s.records.front().k);

        bool terminated = false;
        int terminal_k = -1;
        for (std::size_t i = 0; i < s.records.size(); ++i) {
            const auto& r = s.records[i];
            if (i > 0 && r.k != s.records[i - 1].k + 1) add("GapInFollowUp", s.id, r.k);
            if (terminated) {
                add("RecordAfterTerminal", s.id, r.k,
                    "event or censoring at k=" + std::to_string(terminal_k));
                break;
            }
            const bool miss_ok = (r.c_next == 1)
                                     ? (r.d_next == kMissing && r.y_next == kMissing)
                                 : (r.c_next == 0 && r.d_next == 1) ? (r.y_next == kMissing)
                                 : (r.c_next == 0 && r.d_next == 0) ? (r.y_next != kMissing)
                                                                    : false;
            if (!miss_ok) add("MissingnessViolation", s.id, r.k);
            if (r.c_next == 1 || r.d_next == 1 || r.y_next == 1) {
                terminated = true;
                terminal_k = r.k;
            }
            if (r.k > ds.horizon) add("BeyondHorizon", s.id, r.k);
            if (r.l.size() != ds.schema.entries.size()) {
                add("CovariateArityMismatch", s.id, r.k);
            } else {
                for (std::size_t j = 0; j < r.l.size(); ++j) {
                    const auto& spec = ds.schema.entries[j];
                    double v = r.l[j];
                    if (!std::isfinite(v)) {
                        add("BadCovariateValue", s.id, r.k, spec.name);
                        continue;
                    }
                    if (spec.kind != CovariateKind::Continuous) {
                        const int card =
                            spec.kind == CovariateKind::Binary ? 2 : spec.cardinality;
                        if (std::round(v) != v || v < 0 || v >= card)
                            add("BadCovariateValue", s.id, r.k, spec.name);
                    }
                    if (spec.timing == CovariateTiming::Baseline && r.l[j] != s.records[0].l[j])
                        add("BaselineCovariateChanged", s.id, r.k, spec.name);
                }
            }
        }
        // Event-free, uncensored subjects must be followed through K.
        const auto& last = s.records.back();
        if (!terminated && last.k != ds.horizon) add("ShortFollowUp", s.id, last.k);
    }
    return rep;
}

std::vector<RecordRef> risk_set(const EventHistoryDataset& ds, int k, RiskSetKind kind) {
    if (k < 0 || k > ds.horizon)
        throw IndexOutOfRange("risk_set: k=" + std::to_string(k) + " outside 0.." +
                              std::to_string(ds.horizon));
    std::vector<RecordRef> out;
    for (std::size_t si = 0; si < ds.subjects.size(); ++si) {
        const auto& recs = ds.subjects[si].records;
        for (std::size_t ri = 0; ri < recs.size(); ++ri) {
            const auto& r = recs[ri];
            if (r.k != k) continue;
            // A record at k exists only for subjects with C_k = D_k = Y_k = 0.
            if (kind == RiskSetKind::CHazard) {
                out.push_back({si, ri});
            } else if (kind == RiskSetKind::DHazard) {
                if (r.c_next == 0) out.push_back({si, ri});
            } else {
                if (r.c_next == 0 && r.d_next == 0) out.push_back({si, ri});
            }
        }
    }
    return out;
}

std::vector<RecordRef> risk_set_all(const EventHistoryDataset& ds, RiskSetKind kind) {
    std::vector<RecordRef> out;
    for (int k = 0; k <= ds.horizon; ++k) {
        auto part = risk_set(ds, k, kind);
        out.insert(out.end(), part.begin(), part.end());
    }
    return out;
}

}  // namespace sepcr
