#pragma once

#include "singfbsde/csv.hpp"

#include <sstream>

namespace singfbsde::verify {

enum class Status { pass, fail, info, vacuous };

inline const char* to_string(Status s) {
    switch (s) {
        case Status::pass: return "pass";
        case Status::fail: return "fail";
        case Status::info: return "info";
        case Status::vacuous: return "vacuous";
    }
    return "?";
}

struct Check {
    std::string name;
    Status status = Status::info;
    double measured = std::numeric_limits<double>::quiet_NaN();
    double expected = std::numeric_limits<double>::quiet_NaN();
    double tolerance = std::numeric_limits<double>::quiet_NaN();
    std::string witness;
    std::string note;

    /// Vacuous checks count as passed: their hypotheses are empty.
    bool passed() const { return status == Status::pass || status == Status::vacuous; }
};

class VerificationReport {
public:
    /// Each name may appear once.
    Check& add(Check c) {
        for (const auto& existing : checks_)
            if (existing.name == c.name) throw DomainError("verification report: duplicate check " + c.name);
        checks_.push_back(std::move(c));
        return checks_.back();
    }
    void merge(const VerificationReport& other) {
        for (const auto& c : other.checks_) add(c);
    }

    const std::vector<Check>& checks() const { return checks_; }
    const Check& find(std::string_view name) const {
        for (const auto& c : checks_)
            if (c.name == name) return c;
        throw DomainError("verification report: no check named " + std::string(name));
    }
    bool contains(std::string_view name) const {
        return std::any_of(checks_.begin(), checks_.end(), [&](const Check& c) { return c.name == name; });
    }
    /// Info entries never fail a report.
    bool all_pass() const {
        return std::none_of(checks_.begin(), checks_.end(), [](const Check& c) { return c.status == Status::fail; });
    }
    std::size_t count(Status s) const {
        return static_cast<std::size_t>(
            std::count_if(checks_.begin(), checks_.end(), [s](const Check& c) { return c.status == s; }));
    }

    void write_csv(std::ostream& os) const {
        CsvWriter w(os);
        w.row("name", "status", "measured", "expected", "tolerance", "witness", "note");
        for (const auto& c : checks_)
            w.row(c.name, to_string(c.status), c.measured, c.expected, c.tolerance, c.witness, c.note);
    }

    std::string summary() const {
        std::ostringstream os;
        os << count(Status::pass) << " pass, " << count(Status::fail) << " fail, " << count(Status::info) << " info, "
           << count(Status::vacuous) << " vacuous";
        return os.str();
    }

private:
    std::vector<Check> checks_;
};

}  // namespace singfbsde::verify
