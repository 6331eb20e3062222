#include "acim/escape.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "acim/errors.hpp"

namespace acim {

CertVerdict verify_certificate(const PatchedMap& f, const BoxSet& K, int N,
                               const Rat& eps) {
  if (K.dim() != 1) throw input_error("certificate sets are dim-1");
  if (N < 1) throw input_error("certificate needs N >= 1");
  CertVerdict v;
  v.mass = K.measure();
  v.mass_ok = v.mass > 1 - eps;
  BoxSet img = f.image_iterate(K, N);
  v.image_measure = img.measure();
  v.image_ok = v.image_measure < eps;
  v.pass = v.mass_ok && v.image_ok;
  if (!v.mass_ok)
    v.detail = "REJECT mass: m(K) = " + rat_str(v.mass) + " = " +
               rat_decimal(v.mass) + " is not > 1 - eps = " + rat_str(1 - eps);
  else if (!v.image_ok)
    v.detail = "REJECT image: m(f^" + std::to_string(N) +
               " K) = " + rat_str(v.image_measure) + " = " +
               rat_decimal(v.image_measure) + " is not < eps = " + rat_str(eps);
  else
    v.detail = "verified";
  return v;
}

nlohmann::json certificate_to_json(const EscapeCertificate& c,
                                   const CertVerdict& v) {
  return {{"K", boxset_to_json(c.K)},
          {"K_components", c.K.component_count()},
          {"N", c.N},
          {"eps", rat_str(c.eps)},
          {"mass", rat_str(c.mass)},
          {"mass_dec", rat_decimal(c.mass)},
          {"image_measure", rat_str(c.image_measure)},
          {"image_measure_dec", rat_decimal(c.image_measure)},
          {"exact_image", c.exact_image},
          {"verdict", {{"pass", v.pass},
                       {"mass_ok", v.mass_ok},
                       {"image_ok", v.image_ok},
                       {"detail", v.detail}}}};
}

SearchResult search_certificate(const PatchedMap& f, const Rat& eps, int N_max,
                                int budget, std::uint64_t seed) {
  SearchResult res;
  if (!(eps > 0 && eps < 1)) throw input_error("eps must be in (0,1)");

  // locate mass concentration with the averaging oracle
  const int G = 4096;
  AveragedMeasure avg = kb_average(f, 24, G, 16, seed);
  std::vector<int> order(G);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return avg.density[a] > avg.density[b]; });

  // seed neighborhoods of growing size around the heaviest cells
  for (int cells = 1; cells <= G / 4 && res.candidates_tried < budget; cells *= 4) {
    std::vector<Box> seed_boxes;
    for (int i = 0; i < cells; ++i) {
      long c = order[i];
      seed_boxes.push_back(Box{Interval{frac(c, G), frac(c + 1, G)}});
    }
    BoxSet heavy = BoxSet::from_boxes(1, seed_boxes);
    BoxSet K = complement_in_unit(heavy);
    for (int N = 1; N <= N_max && res.candidates_tried < budget; ++N) {
      ++res.candidates_tried;
      CertVerdict v = verify_certificate(f, K, N, eps);
      if (v.pass) {
        res.found = true;
        res.cert = EscapeCertificate{K, N, eps, v.mass, v.image_measure, true};
        return res;
      }
    }
  }
  return res;  // exhausted: no escape found at this budget
}

AveragedMeasure kb_average(const PatchedMap& f, int n, int G,
                           int samples_per_cell, std::uint64_t seed) {
  if (G < 2) throw input_error("grid needs G >= 2");
  if (n < 1) throw input_error("need n >= 1");
  AveragedMeasure out;
  out.G = G;
  out.n = n;
  std::vector<double> cur(G, 1.0 / G), nxt(G), acc(G, 0.0);
  const double inv_s = 1.0 / samples_per_cell;
  for (int t = 0; t < n; ++t) {
    for (int c = 0; c < G; ++c) acc[c] += cur[c];
    std::fill(nxt.begin(), nxt.end(), 0.0);
    for (int c = 0; c < G; ++c) {
      double m = cur[c];
      if (m == 0) continue;
      for (int j = 0; j < samples_per_cell; ++j) {
        // stratified with a deterministic seed-dependent offset
        double off = ((seed * 2654435761u + (std::uint64_t)j * 40503u) % 997u) / 997.0;
        double x = (c + (j + off) * inv_s) / G;
        double y = f.evaluate_d(x);
        long cell = (long)(y * G);
        if (cell < 0) cell = 0;
        if (cell >= G) cell = G - 1;
        nxt[cell] += m * inv_s;
      }
    }
    cur.swap(nxt);
  }
  double total = 0;
  for (double v : acc) total += v;
  out.density.resize(G);
  for (int c = 0; c < G; ++c) out.density[c] = acc[c] / total;
  return out;
}

double concentration_statistic(const AveragedMeasure& a, double q) {
  if (!(q > 0 && q < 1)) throw input_error("q must be in (0,1)");
  std::vector<double> d = a.density;
  std::sort(d.begin(), d.end(), std::greater<double>());
  double cum = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    cum += d[i];
    if (cum >= q) return double(i + 1) / a.G;
  }
  return 1.0;
}

double l1_to_uniform(const AveragedMeasure& a) {
  double s = 0, u = 1.0 / a.G;
  for (double v : a.density) s += std::fabs(v - u);
  return s;
}

double grid_image_measure(const PatchedMap& f, const BoxSet& K, int N, int G,
                          int oversample) {
  std::vector<char> hit(G, 0);
  long M = (long)G * oversample;
  for (const auto& seg : K.segments()) {
    double lo = rat_double(seg.lo), hi = rat_double(seg.hi);
    long a = (long)std::floor(lo * M), b = (long)std::ceil(hi * M);
    for (long j = a; j <= b; ++j) {
      double x = (j + 0.5) / M;
      if (x < lo || x > hi) continue;
      double y = x;
      for (int t = 0; t < N; ++t) y = f.evaluate_d(y);
      long cell = (long)(y * G);
      if (cell < 0) cell = 0;
      if (cell >= G) cell = G - 1;
      hit[cell] = 1;
    }
  }
  long cnt = 0;
  for (char h : hit) cnt += h;
  return double(cnt) / G;
}

void write_density_csv(const std::string& path, const AveragedMeasure& a) {
  std::ofstream os(path);
  os << "cell,mass\n";
  for (int c = 0; c < a.G; ++c) os << c << "," << a.density[c] << "\n";
}

void write_concentration_csv(const std::string& path, const AveragedMeasure& a,
                             const std::vector<double>& qs) {
  std::ofstream os(path);
  os << "q,smallest_cell_fraction\n";
  for (double q : qs) os << q << "," << concentration_statistic(a, q) << "\n";
}

}  // namespace acim
