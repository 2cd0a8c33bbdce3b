#pragma once

// AS relationship graph (p2c / p2p) with cached customer-cone queries.

#include <charconv>
#include <memory>
#include <mutex>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "guardsets/core.hpp"

namespace guardsets {

struct CustomerCone {
  AsNumber root;
  std::vector<AsNumber> members;  // ascending, includes root

  std::size_t size() const noexcept { return members.size(); }
  bool contains(AsNumber a) const { return std::binary_search(members.begin(), members.end(), a); }
};

class AsGraph {
 public:
  AsGraph() : cache_(std::make_unique<Cache>()) {}
  AsGraph(const AsGraph& other)
      : index_(other.index_),
        asn_(other.asn_),
        customers_(other.customers_),
        providers_(other.providers_),
        peers_(other.peers_),
        cache_(std::make_unique<Cache>()) {}
  AsGraph(AsGraph&&) noexcept = default;
  AsGraph& operator=(const AsGraph& other) {
    if (this != &other) *this = AsGraph(other);
    return *this;
  }
  AsGraph& operator=(AsGraph&&) noexcept = default;

  void add_node(AsNumber a) { (void)ensure(a); }

  void add_p2c(AsNumber provider, AsNumber customer) {
    if (provider == customer) throw std::invalid_argument("p2c self-loop on AS" + to_string(provider));
    auto p = ensure(provider);
    auto c = ensure(customer);
    insert_sorted(customers_[p], customer);
    insert_sorted(providers_[c], provider);
    invalidate();
  }

  void add_p2p(AsNumber a, AsNumber b) {
    if (a == b) throw std::invalid_argument("p2p self-loop on AS" + to_string(a));
    auto ia = ensure(a);
    auto ib = ensure(b);
    insert_sorted(peers_[ia], b);
    insert_sorted(peers_[ib], a);
    invalidate();
  }

  bool contains(AsNumber a) const { return index_.count(a) != 0; }
  std::size_t node_count() const noexcept { return asn_.size(); }

  std::vector<AsNumber> nodes() const {
    std::vector<AsNumber> out = asn_;
    std::sort(out.begin(), out.end());
    return out;
  }

  std::span<const AsNumber> customers(AsNumber a) const { return customers_[index_of(a)]; }
  std::span<const AsNumber> providers(AsNumber a) const { return providers_[index_of(a)]; }
  std::span<const AsNumber> peers(AsNumber a) const { return peers_[index_of(a)]; }

  std::vector<std::pair<AsNumber, AsNumber>> p2c_edges() const {
    std::vector<std::pair<AsNumber, AsNumber>> out;
    for (std::size_t i = 0; i < asn_.size(); ++i)
      for (auto c : customers_[i]) out.emplace_back(asn_[i], c);
    std::sort(out.begin(), out.end());
    return out;
  }

  std::vector<std::pair<AsNumber, AsNumber>> p2p_edges() const {
    std::vector<std::pair<AsNumber, AsNumber>> out;
    for (std::size_t i = 0; i < asn_.size(); ++i)
      for (auto p : peers_[i])
        if (asn_[i] < p) out.emplace_back(asn_[i], p);
    std::sort(out.begin(), out.end());
    return out;
  }

  // All ASes reachable from root over zero or more p2c hops. A visited set
  // keeps this finite when the input data contains p2c cycles.
  const CustomerCone& cone(AsNumber root) const {
    auto idx = index_of(root);
    std::lock_guard lock(cache_->mutex);
    auto& slot = cache_slot(cache_->cones, idx);
    if (!slot) slot = std::make_shared<const CustomerCone>(compute_cone(idx));
    return *slot;
  }

  std::size_t cone_size(AsNumber root) const { return cone(root).size(); }

  // Transitive providers of a (excluding a itself), ascending.
  const std::vector<AsNumber>& ancestors(AsNumber a) const {
    auto idx = index_of(a);
    std::lock_guard lock(cache_->mutex);
    auto& slot = cache_slot(cache_->ancestors, idx);
    if (!slot) slot = std::make_shared<const std::vector<AsNumber>>(compute_ancestors(idx));
    return *slot;
  }

  bool in_cone(AsNumber root, AsNumber member) const {
    if (root == member) return contains(root);
    const auto& up = ancestors(member);
    return std::binary_search(up.begin(), up.end(), root);
  }

  // Populate every cone and ancestor list up front so later reads never
  // contend on the cache lock for long.
  void warm_caches() const {
    for (auto a : asn_) {
      (void)cone(a);
      (void)ancestors(a);
    }
  }

  std::string serialize() const {
    std::ostringstream out;
    for (auto [p, c] : p2c_edges()) out << p.value << '|' << c.value << "|-1\n";
    for (auto [a, b] : p2p_edges()) out << a.value << '|' << b.value << "|0\n";
    return out.str();
  }

 private:
  struct Cache {
    std::mutex mutex;
    std::vector<std::shared_ptr<const CustomerCone>> cones;
    std::vector<std::shared_ptr<const std::vector<AsNumber>>> ancestors;
  };

  template <typename T>
  std::shared_ptr<const T>& cache_slot(std::vector<std::shared_ptr<const T>>& v, std::uint32_t idx) const {
    if (v.size() < asn_.size()) v.resize(asn_.size());
    return v[idx];
  }

  static void insert_sorted(std::vector<AsNumber>& v, AsNumber a) {
    auto it = std::lower_bound(v.begin(), v.end(), a);
    if (it == v.end() || *it != a) v.insert(it, a);
  }

  std::uint32_t ensure(AsNumber a) {
    if (a.value == 0) throw std::invalid_argument("AS number must be positive");
    auto [it, inserted] = index_.try_emplace(a, static_cast<std::uint32_t>(asn_.size()));
    if (inserted) {
      asn_.push_back(a);
      customers_.emplace_back();
      providers_.emplace_back();
      peers_.emplace_back();
      invalidate();
    }
    return it->second;
  }

  std::uint32_t index_of(AsNumber a) const {
    auto it = index_.find(a);
    if (it == index_.end()) throw NotFoundError("AS" + to_string(a) + " not in graph");
    return it->second;
  }

  void invalidate() {
    std::lock_guard lock(cache_->mutex);
    cache_->cones.clear();
    cache_->ancestors.clear();
  }

  template <typename Next>
  std::vector<AsNumber> reach(std::uint32_t start, Next next, bool include_start) const {
    std::vector<char> seen(asn_.size(), 0);
    std::vector<std::uint32_t> stack{start};
    seen[start] = 1;
    std::vector<AsNumber> out;
    if (include_start) out.push_back(asn_[start]);
    while (!stack.empty()) {
      auto cur = stack.back();
      stack.pop_back();
      for (auto n : next(cur)) {
        auto ni = index_.at(n);
        if (seen[ni]) continue;
        seen[ni] = 1;
        out.push_back(n);
        stack.push_back(ni);
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  CustomerCone compute_cone(std::uint32_t idx) const {
    return CustomerCone{asn_[idx], reach(idx, [this](std::uint32_t i) -> const std::vector<AsNumber>& {
                                          return customers_[i];
                                        }, true)};
  }

  std::vector<AsNumber> compute_ancestors(std::uint32_t idx) const {
    auto out = reach(idx, [this](std::uint32_t i) -> const std::vector<AsNumber>& { return providers_[i]; }, false);
    // a p2c cycle can lead back to the start node
    out.erase(std::remove(out.begin(), out.end(), asn_[idx]), out.end());
    return out;
  }

  std::unordered_map<AsNumber, std::uint32_t> index_;
  std::vector<AsNumber> asn_;
  std::vector<std::vector<AsNumber>> customers_;
  std::vector<std::vector<AsNumber>> providers_;
  std::vector<std::vector<AsNumber>> peers_;
  std::unique_ptr<Cache> cache_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const char* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    auto j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
  s = trim(s);
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

// Calls fn(line_number, line) for each line; line numbers start at 1.
template <typename Fn>
void for_each_line(std::string_view text, Fn fn) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    auto line = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    fn(++line_no, line);
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
}

}  // namespace detail

// CAIDA serial-1 relationship text: "A|B|-1" (A provides transit to B) or
// "A|B|0" (peers). A fourth serial-2 "source" field is tolerated.
inline AsGraph parse_as_rel(std::string_view text) {
  AsGraph graph;
  detail::for_each_line(text, [&](std::size_t line_no, std::string_view raw) {
    auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#') return;
    auto fields = detail::split(line, '|');
    if (fields.size() != 3 && fields.size() != 4)
      throw ParseError(line_no, "expected A|B|code, got " + std::to_string(fields.size()) + " fields");
    std::uint32_t a = 0, b = 0;
    int code = 0;
    if (!detail::parse_int(fields[0], a) || a == 0) throw ParseError(line_no, "bad AS number '" + std::string(fields[0]) + "'");
    if (!detail::parse_int(fields[1], b) || b == 0) throw ParseError(line_no, "bad AS number '" + std::string(fields[1]) + "'");
    if (!detail::parse_int(fields[2], code) || (code != -1 && code != 0))
      throw ParseError(line_no, "unknown relationship code '" + std::string(fields[2]) + "'");
    if (a == b) throw ParseError(line_no, "self relationship on AS" + std::to_string(a));
    if (code == -1)
      graph.add_p2c(AsNumber{a}, AsNumber{b});
    else
      graph.add_p2p(AsNumber{a}, AsNumber{b});
  });
  return graph;
}

inline CustomerCone customer_cone(const AsGraph& graph, AsNumber root) { return graph.cone(root); }

// Direct providers of a, ascending.
inline std::vector<AsNumber> providers_of(const AsGraph& graph, AsNumber a) {
  auto p = graph.providers(a);
  return {p.begin(), p.end()};
}

}  // namespace guardsets
