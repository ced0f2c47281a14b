#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "robostack/core/error.hpp"

namespace robostack {

// Symmetric travel-cost table between named locations. Must be metric: zero on
// the diagonal, positive between distinct locations, and triangle-respecting.
class DistanceTable {
 public:
  static constexpr double kTolerance = 1e-9;

  DistanceTable() = default;

  void add_location(const std::string& loc) {
    if (std::find(locations_.begin(), locations_.end(), loc) == locations_.end()) {
      locations_.push_back(loc);
      std::sort(locations_.begin(), locations_.end());
    }
  }

  void set(const std::string& a, const std::string& b, double d) {
    if (a == b) {
      if (d != 0.0) throw MetricViolation("d(" + a + "," + a + ") must be 0");
      add_location(a);
      return;
    }
    if (!(d > 0.0) || !std::isfinite(d))
      throw MetricViolation("d(" + a + "," + b + ") must be positive and finite");
    if (auto it = table_.find(key(a, b)); it != table_.end() && std::abs(it->second - d) > kTolerance)
      throw MetricViolation("asymmetric entry for (" + a + "," + b + ")");
    table_[key(a, b)] = d;
    add_location(a);
    add_location(b);
  }

  bool contains(const std::string& loc) const {
    return std::binary_search(locations_.begin(), locations_.end(), loc);
  }

  double operator()(const std::string& a, const std::string& b) const {
    if (a == b) return 0.0;
    auto it = table_.find(key(a, b));
    if (it == table_.end()) throw SchemaError("no distance entry for (" + a + "," + b + ")");
    return it->second;
  }

  const std::vector<std::string>& locations() const { return locations_; }

  // Throws SchemaError on a missing pair, MetricViolation on a triangle breach.
  void validate() const {
    for (const auto& a : locations_)
      for (const auto& b : locations_)
        if (a < b && !table_.count(key(a, b)))
          throw SchemaError("distance table misses pair (" + a + "," + b + ")");
    for (const auto& a : locations_)
      for (const auto& b : locations_)
        for (const auto& c : locations_) {
          if (a == b || b == c || a == c) continue;
          if ((*this)(a, c) > (*this)(a, b) + (*this)(b, c) + kTolerance)
            throw MetricViolation("triangle inequality violated: d(" + a + "," + c + ") > d(" + a +
                                  "," + b + ") + d(" + b + "," + c + ")");
        }
  }

 private:
  static std::pair<std::string, std::string> key(const std::string& a, const std::string& b) {
    return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
  }

  std::vector<std::string> locations_;
  std::map<std::pair<std::string, std::string>, double> table_;
};

}  // namespace robostack
