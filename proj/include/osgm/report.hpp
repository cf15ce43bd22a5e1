#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace osgm {

// One named inequality, checked possibly many times. slack is
// (right-hand side) - (left-hand side); a check passes while every slack is
// at least -tolerance.
struct CheckRecord {
  std::string name;
  long checked = 0;
  double worst_slack = std::numeric_limits<double>::infinity();
  double worst_margin = std::numeric_limits<double>::infinity();
  long worst_at = -1;
  bool skipped = false;
  std::string note;

  bool pass() const { return skipped || worst_margin >= 0; }
};

class MonitorReport {
 public:
  void record(const std::string& name, double slack, double tolerance, long at = -1) {
    CheckRecord& r = entry(name);
    r.skipped = false;
    ++r.checked;
    const double margin = std::isnan(slack) ? -std::numeric_limits<double>::infinity() : slack + tolerance;
    if (margin < r.worst_margin) {
      r.worst_margin = margin;
      r.worst_slack = std::isnan(slack) ? -std::numeric_limits<double>::infinity() : slack;
      r.worst_at = at;
    }
  }

  void skip(const std::string& name, const std::string& reason) {
    CheckRecord& r = entry(name);
    if (r.checked == 0) {
      r.skipped = true;
      r.note = reason;
    }
  }

  void note(const std::string& name, const std::string& text) { entry(name).note = text; }

  const std::vector<CheckRecord>& records() const { return records_; }
  bool empty() const { return records_.empty(); }

  const CheckRecord* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &records_[it->second];
  }

  bool all_pass() const {
    for (const auto& r : records_)
      if (!r.pass()) return false;
    return true;
  }

  long failures() const {
    long n = 0;
    for (const auto& r : records_)
      if (!r.pass()) ++n;
    return n;
  }

  // Pass/fail per check family, keyed by the name up to the first '.'.
  std::map<std::string, bool> summary() const {
    std::map<std::string, bool> out;
    for (const auto& r : records_) {
      if (r.skipped) continue;
      const std::string family = r.name.substr(0, r.name.find('.'));
      auto [it, inserted] = out.emplace(family, true);
      it->second = it->second && r.pass();
    }
    return out;
  }

  // Records whose name starts with prefix.
  MonitorReport select(const std::string& prefix) const {
    MonitorReport out;
    for (const auto& r : records_)
      if (r.name.compare(0, prefix.size(), prefix) == 0) out.entry(r.name) = r;
    return out;
  }

  void merge(const MonitorReport& other, const std::string& prefix = "") {
    for (const auto& r : other.records_) {
      CheckRecord& mine = entry(prefix + r.name);
      if (r.skipped) {
        if (mine.checked == 0) {
          mine.skipped = true;
          mine.note = r.note;
        }
        continue;
      }
      if (mine.skipped) mine.note.clear();
      mine.skipped = false;
      mine.checked += r.checked;
      if (r.worst_margin < mine.worst_margin) {
        mine.worst_margin = r.worst_margin;
        mine.worst_slack = r.worst_slack;
        mine.worst_at = r.worst_at;
      }
      if (!r.note.empty()) mine.note = r.note;
    }
  }

 private:
  CheckRecord& entry(const std::string& name) {
    auto it = index_.find(name);
    if (it != index_.end()) return records_[it->second];
    index_.emplace(name, records_.size());
    CheckRecord r;
    r.name = name;
    records_.push_back(std::move(r));
    return records_.back();
  }

  std::vector<CheckRecord> records_;
  std::map<std::string, size_t> index_;
};

}  // namespace osgm
