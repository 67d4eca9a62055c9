// Writes the bundled classification fixtures: two-level Gaussian cluster
// mixtures sized like their UCI namesakes. Labels live at two spatial
// scales — most top-level clusters are class-pure, the rest alternate class
// across their subclusters — so several bandwidths of the default kernel
// ladder carry complementary signal. A fraction of rows form an isotropic
// background cloud with random labels: those rows are far from every
// cluster at all bandwidths, which caps attainable accuracy without
// distorting which kernels look informative. Variance fractions are stated
// in standardized units: a squared distance of 2 * features * fraction.
// Regenerate with: gen_fixtures [out_dir]   (fully seeded, byte-stable)
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mklforge/linalg.hpp"
#include "mklforge/rng.hpp"

using mklforge::Matrix;
using mklforge::Rng;
using mklforge::Vector;

namespace {

struct MixtureSpec {
  std::string file;
  int rows = 0;
  int features = 0;
  int clusters = 0;
  int subclusters = 3;     // per cluster
  int mixed_clusters = 0;  // clusters whose subclusters alternate class
  double within_fraction = 0.01;  // variance share inside a subcluster
  double sub_fraction = 0.03;     // variance share between subclusters of a cluster
  double background_fraction = 0.0;  // rows drawn isotropically with random labels
  double flip_rate = 0.0;
  std::uint64_t seed = 0;
};

void write_mixture(const std::filesystem::path& dir, const MixtureSpec& spec) {
  Rng rng(spec.seed);
  const double s_within = std::sqrt(spec.within_fraction);
  const double s_sub = std::sqrt(spec.sub_fraction);
  const double s_top = std::sqrt(1.0 - spec.within_fraction - spec.sub_fraction);

  std::vector<std::vector<Vector>> centers(spec.clusters);
  for (int c = 0; c < spec.clusters; ++c) {
    const Vector top = s_top * rng.normal_vector(spec.features);
    for (int s = 0; s < spec.subclusters; ++s)
      centers[c].push_back(top + s_sub * rng.normal_vector(spec.features));
  }

  const int n_background = static_cast<int>(std::lround(spec.rows * spec.background_fraction));
  const int n_clustered = spec.rows - n_background;

  // Round-robin assignment keeps cluster and subcluster sizes balanced; the
  // first `mixed_clusters` clusters alternate class across subclusters, the
  // rest alternate class at the cluster level.
  const auto order = rng.permutation(n_clustered);
  Matrix x(spec.rows, spec.features);
  Vector y(spec.rows);
  for (int i = 0; i < n_clustered; ++i) {
    const int cell = order[i] % (spec.clusters * spec.subclusters);
    const int cluster = cell % spec.clusters;
    const int sub = cell / spec.clusters;
    x.row(i) = (centers[cluster][sub] + s_within * rng.normal_vector(spec.features)).transpose();
    double label;
    if (cluster < spec.mixed_clusters)
      label = sub % 2 == 0 ? 1.0 : -1.0;
    else
      label = cluster % 2 == 0 ? 1.0 : -1.0;
    if (rng.uniform01() < spec.flip_rate) label = -label;
    y(i) = label;
  }
  for (int i = n_clustered; i < spec.rows; ++i) {
    x.row(i) = rng.normal_vector(spec.features).transpose();
    y(i) = rng.uniform01() < 0.5 ? 1.0 : -1.0;
  }

  // Interleave background and clustered rows so file order carries no
  // information (splits are random anyway, but keep the file unsuggestive).
  const auto shuffle = rng.permutation(spec.rows);

  const auto path = dir / spec.file;
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    std::fprintf(stderr, "cannot write %s\n", path.string().c_str());
    std::exit(1);
  }
  char buf[40];
  for (int r = 0; r < spec.rows; ++r) {
    const int i = shuffle[r];
    for (int j = 0; j < spec.features; ++j) {
      std::snprintf(buf, sizeof(buf), "%.10g", x(i, j));
      out << buf << ',';
    }
    out << (y(i) > 0 ? "1" : "-1") << '\n';
  }
  std::printf("wrote %s (%d rows, %d features, %dx%d cells, %d background)\n",
              path.string().c_str(), spec.rows, spec.features, spec.clusters, spec.subclusters,
              n_background);
}

}  // namespace

int main(int argc, char** argv) {
  const std::filesystem::path dir = argc > 1 ? argv[1] : "data";
  std::filesystem::create_directories(dir);

  MixtureSpec ionosphere;
  ionosphere.file = "ionosphere_synth.csv";
  ionosphere.rows = 351;
  ionosphere.features = 34;
  ionosphere.clusters = 5;
  ionosphere.subclusters = 3;
  ionosphere.mixed_clusters = 1;
  ionosphere.within_fraction = 0.018;  // subcluster dist^2 ~ 1.2
  ionosphere.sub_fraction = 0.056;     // same-cluster dist^2 ~ 5
  ionosphere.background_fraction = 0.22;
  ionosphere.flip_rate = 0.0;
  ionosphere.seed = 0x10A051;
  write_mixture(dir, ionosphere);

  MixtureSpec sonar;
  sonar.file = "sonar_synth.csv";
  sonar.rows = 208;
  sonar.features = 60;
  sonar.clusters = 4;
  sonar.subclusters = 3;
  sonar.mixed_clusters = 1;
  sonar.within_fraction = 0.010;  // subcluster dist^2 ~ 1.2
  sonar.sub_fraction = 0.033;     // same-cluster dist^2 ~ 5.2
  sonar.background_fraction = 0.40;
  sonar.flip_rate = 0.0;
  sonar.seed = 0x50A412;
  write_mixture(dir, sonar);
  return 0;
}
