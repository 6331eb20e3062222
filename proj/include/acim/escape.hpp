// Measure-escape certificates and their independent grid oracle.
//
// A certificate (K, N, eps) witnesses m(K) > 1 - eps together with
// m(f^N K) < eps. Verification is exact whenever the map supports exact
// forward images (affine base + compressor patches); the averaging oracle is
// a plain finite-resolution transfer approximation used for cross-checks and
// diagnostics, never for certification.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "acim/geometry.hpp"
#include "acim/maps.hpp"
#include "acim/rational.hpp"

#include "json.hpp"

namespace acim {

struct EscapeCertificate {
  BoxSet K;
  int N = 1;
  Rat eps;
  Rat mass;           // m(K), exact
  Rat image_measure;  // m(f^N K), exact (or certified upper bound)
  bool exact_image = true;
};

struct CertVerdict {
  bool pass = false;
  bool mass_ok = false;
  bool image_ok = false;
  Rat mass;
  Rat image_measure;
  std::string detail;  // witness ledger line on failure
};

CertVerdict verify_certificate(const PatchedMap& f, const BoxSet& K, int N,
                               const Rat& eps);

nlohmann::json certificate_to_json(const EscapeCertificate& c,
                                   const CertVerdict& v);

struct SearchResult {
  bool found = false;
  EscapeCertificate cert;
  int candidates_tried = 0;
};

// Tries complements of small high-mass seed neighborhoods (located by the
// averaging oracle) over N <= N_max. Exhaustion means "no escape found at
// this budget", never that an invariant density exists.
SearchResult search_certificate(const PatchedMap& f, const Rat& eps, int N_max,
                                int budget, std::uint64_t seed = 1);

struct AveragedMeasure {
  int G = 0;
  int n = 0;
  std::vector<double> density;  // masses per cell, total ~ 1
};

// Cesaro average of grid push-forwards of the uniform density; each cell's
// mass is redistributed through `samples_per_cell` stratified points.
AveragedMeasure kb_average(const PatchedMap& f, int n, int G,
                           int samples_per_cell = 32, std::uint64_t seed = 1);

// Lebesgue measure (cell count / G) of the smallest cell family carrying
// mass >= q.
double concentration_statistic(const AveragedMeasure& a, double q);

double l1_to_uniform(const AveragedMeasure& a);

// Deterministic hit-cell estimate of m(f^N K) at resolution G: stratified
// points of K pushed N steps, counting touched cells. Agreement with the
// exact ledger degrades like (component count)/G.
double grid_image_measure(const PatchedMap& f, const BoxSet& K, int N, int G,
                          int oversample = 8);

void write_density_csv(const std::string& path, const AveragedMeasure& a);
void write_concentration_csv(const std::string& path, const AveragedMeasure& a,
                             const std::vector<double>& qs);

}  // namespace acim
