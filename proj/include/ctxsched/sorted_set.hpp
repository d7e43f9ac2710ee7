#pragma once

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

namespace ctxsched {

using Label = std::uint32_t;
using ContextId = std::uint32_t;

/// Small ordered set backed by a sorted vector. Iteration is ascending.
template <typename T>
class SortedSet {
 public:
  using value_type = T;
  using const_iterator = typename std::vector<T>::const_iterator;

  SortedSet() = default;
  SortedSet(std::initializer_list<T> items) : items_(items) { normalize(); }
  explicit SortedSet(std::vector<T> items) : items_(std::move(items)) { normalize(); }
  template <typename It>
  SortedSet(It first, It last) : items_(first, last) {
    normalize();
  }

  const_iterator begin() const noexcept { return items_.begin(); }
  const_iterator end() const noexcept { return items_.end(); }
  std::size_t size() const noexcept { return items_.size(); }
  bool empty() const noexcept { return items_.empty(); }
  const T& front() const { return items_.front(); }
  const T& back() const { return items_.back(); }
  const std::vector<T>& values() const noexcept { return items_; }

  bool contains(const T& v) const { return std::binary_search(items_.begin(), items_.end(), v); }

  bool insert(const T& v) {
    auto it = std::lower_bound(items_.begin(), items_.end(), v);
    if (it != items_.end() && *it == v) return false;
    items_.insert(it, v);
    return true;
  }

  bool erase(const T& v) {
    auto it = std::lower_bound(items_.begin(), items_.end(), v);
    if (it == items_.end() || *it != v) return false;
    items_.erase(it);
    return true;
  }

  bool includes(const SortedSet& other) const {
    return std::includes(items_.begin(), items_.end(), other.begin(), other.end());
  }

  friend bool operator==(const SortedSet&, const SortedSet&) = default;
  friend auto operator<=>(const SortedSet&, const SortedSet&) = default;

 private:
  void normalize() {
    std::sort(items_.begin(), items_.end());
    items_.erase(std::unique(items_.begin(), items_.end()), items_.end());
  }

  std::vector<T> items_;
};

template <typename T>
SortedSet<T> set_union(const SortedSet<T>& a, const SortedSet<T>& b) {
  std::vector<T> out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return SortedSet<T>(std::move(out));
}

template <typename T>
SortedSet<T> set_intersection(const SortedSet<T>& a, const SortedSet<T>& b) {
  std::vector<T> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return SortedSet<T>(std::move(out));
}

template <typename T>
SortedSet<T> set_difference(const SortedSet<T>& a, const SortedSet<T>& b) {
  std::vector<T> out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return SortedSet<T>(std::move(out));
}

template <typename T>
std::size_t symmetric_difference_size(const SortedSet<T>& a, const SortedSet<T>& b) {
  std::size_t n = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++n;
      ++i;
    } else if (*j < *i) {
      ++n;
      ++j;
    } else {
      ++i;
      ++j;
    }
  }
  return n + static_cast<std::size_t>(std::distance(i, a.end())) +
         static_cast<std::size_t>(std::distance(j, b.end()));
}

template <typename T>
std::string to_string(const SortedSet<T>& s) {
  std::ostringstream os;
  os << '{';
  bool first = true;
  for (const auto& v : s) {
    if (!first) os << ',';
    os << v;
    first = false;
  }
  os << '}';
  return os.str();
}

using LabelSet = SortedSet<Label>;
using ContextSet = SortedSet<ContextId>;

}  // namespace ctxsched
