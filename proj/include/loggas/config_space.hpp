#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace loggas {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// A finite particle configuration on the line, kept sorted ascending.
// Coincident points are representable (multiplicity), but every energy
// functional in the project assigns them infinite energy and the samplers
// and integrators keep configurations strictly sorted.
class Configuration {
 public:
  Configuration() = default;

  explicit Configuration(std::vector<double> pts) : points_(std::move(pts)) {
    std::sort(points_.begin(), points_.end());
  }

  // Wraps an already-sorted vector without re-sorting.
  static Configuration from_sorted(std::vector<double> pts) {
    assert(std::is_sorted(pts.begin(), pts.end()));
    Configuration c;
    c.points_ = std::move(pts);
    return c;
  }

  std::size_t count() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  double operator[](std::size_t i) const { return points_[i]; }
  const std::vector<double>& points() const { return points_; }

  bool strictly_sorted() const {
    for (std::size_t i = 1; i < points_.size(); ++i)
      if (!(points_[i - 1] < points_[i])) return false;
    return true;
  }

  double min_gap() const {
    double g = kInf;
    for (std::size_t i = 1; i < points_.size(); ++i)
      g = std::min(g, points_[i] - points_[i - 1]);
    return g;
  }

  bool inside_window(double r) const {
    for (double x : points_)
      if (std::abs(x) > r) return false;
    return true;
  }

  friend bool operator==(const Configuration& a, const Configuration& b) {
    return a.points_ == b.points_;
  }

 private:
  std::vector<double> points_;
};

// Conditioning data outside the window: sorted points with |y| > r.
struct ExteriorConfiguration {
  double r = 1.0;
  std::vector<double> points;

  static ExteriorConfiguration make(double r, std::vector<double> pts) {
    if (!(r > 0)) throw std::invalid_argument("window half-width must be positive");
    std::sort(pts.begin(), pts.end());
    for (double y : pts)
      if (!(std::abs(y) > r))
        throw std::invalid_argument("exterior point inside closed window");
    return ExteriorConfiguration{r, std::move(pts)};
  }
};

// Reflects a real number into [-r, r] by folding at the walls (sawtooth in
// the universal cover). Identity on the interval and 1-Lipschitz:
// |fold(a) - fold(b)| <= |a - b|, which is what makes synchronously coupled
// reflected paths non-expanding at the boundary.
inline double fold_into_window(double x, double r) {
  // Exact on the window itself: the shift-and-reduce path below would round
  // through x + r and perturb interior points by an ulp.
  if (std::abs(x) <= r) return x;
  const double span = 2.0 * r;
  double y = std::fmod(x + r, 2.0 * span);
  if (y < 0) y += 2.0 * span;
  return y < span ? y - r : 3.0 * r - y;
}

// Interior part: points with |x| <= r (the window is the closed ball).
inline Configuration restrict_to_window(const Configuration& c, double r) {
  std::vector<double> kept;
  for (double x : c.points())
    if (std::abs(x) <= r) kept.push_back(x);
  return Configuration::from_sorted(std::move(kept));
}

inline ExteriorConfiguration exterior_of(const Configuration& c, double r) {
  std::vector<double> kept;
  for (double x : c.points())
    if (std::abs(x) > r) kept.push_back(x);
  return ExteriorConfiguration{r, std::move(kept)};
}

// Disjoint union of an interior configuration and exterior data.
inline Configuration merge(const Configuration& interior,
                           const ExteriorConfiguration& exterior) {
  if (!interior.inside_window(exterior.r))
    throw std::invalid_argument("interior point outside closed window");
  std::vector<double> all;
  all.reserve(interior.count() + exterior.points.size());
  std::merge(interior.points().begin(), interior.points().end(),
             exterior.points.begin(), exterior.points.end(),
             std::back_inserter(all));
  return Configuration::from_sorted(std::move(all));
}

// L2 matching distance between configurations: the minimum over pairings of
// the root-sum-square displacement, infinite when the counts differ. On the
// line with squared cost the monotone (sorted index) pairing is optimal, so
// the sum runs in index order, which also fixes the rounding order.
inline double matching_distance(const Configuration& a,
                                const Configuration& b) {
  if (a.count() != b.count()) return kInf;
  double s = 0;
  for (std::size_t i = 0; i < a.count(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

// Exhaustive check over all pairings. Only for small counts; the factorial
// growth makes anything beyond 6 points pointless.
inline double matching_distance_bruteforce(const Configuration& a,
                                           const Configuration& b) {
  if (a.count() != b.count()) return kInf;
  if (a.count() > 6)
    throw std::invalid_argument("bruteforce matching limited to 6 points");
  std::vector<std::size_t> perm(a.count());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  double best = a.count() == 0 ? 0.0 : kInf;
  do {
    double s = 0;
    for (std::size_t i = 0; i < a.count(); ++i) {
      double d = a[i] - b[perm[i]];
      s += d * d;
    }
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::sqrt(best);
}

// Distance that only moves interior points: finite exactly when both
// configurations carry identical exterior data (bitwise) and equally many
// interior points. Because matched exteriors pair up at zero displacement
// under the monotone pairing, the value then equals the full matching
// distance.
inline double bar_distance(const Configuration& a, const Configuration& b,
                           double r) {
  const ExteriorConfiguration ea = exterior_of(a, r);
  const ExteriorConfiguration eb = exterior_of(b, r);
  if (ea.points != eb.points) return kInf;
  if (a.count() != b.count()) return kInf;
  return matching_distance(a, b);
}

// CSV ensemble format: header then one row per point, keyed by the owning
// configuration's id. %.17g keeps doubles round-trip exact.
inline void write_configurations_csv(std::ostream& out,
                                     const std::vector<Configuration>& cs) {
  out << "config_id,particle_index,x\n";
  char buf[64];
  for (std::size_t id = 0; id < cs.size(); ++id) {
    for (std::size_t i = 0; i < cs[id].count(); ++i) {
      std::snprintf(buf, sizeof(buf), "%zu,%zu,%.17g\n", id, i, cs[id][i]);
      out << buf;
    }
  }
}

inline std::vector<Configuration> read_configurations_csv(std::istream& in) {
  std::string line;
  // Lines starting with '#' before the header hold file metadata.
  while (std::getline(in, line) && !line.empty() && line[0] == '#') {}
  if (line.rfind("config_id", 0) != 0)
    throw std::invalid_argument("missing config_id CSV header");
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const char* p = line.c_str();
    char* end = nullptr;
    unsigned long id = std::strtoul(p, &end, 10);
    if (end == p || *end != ',') throw std::invalid_argument("bad CSV row: " + line);
    p = end + 1;
    std::strtoul(p, &end, 10);
    if (end == p || *end != ',') throw std::invalid_argument("bad CSV row: " + line);
    p = end + 1;
    double x = std::strtod(p, &end);
    if (end == p) throw std::invalid_argument("bad CSV row: " + line);
    if (rows.size() <= id) rows.resize(id + 1);
    rows[id].push_back(x);
  }
  std::vector<Configuration> cs;
  cs.reserve(rows.size());
  for (auto& rv : rows) cs.push_back(Configuration(std::move(rv)));
  return cs;
}

}  // namespace loggas
