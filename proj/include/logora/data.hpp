#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "logora/tensor.hpp"

namespace logora {

enum class Domain { kSource, kTarget };

std::string domain_name(Domain domain);
Domain parse_domain(const std::string& name);

inline constexpr int kUnlabeled = -1;

/// One multivariate series. `values` is time-major: values[t * d + c].
struct TimeSeriesSample {
  std::vector<float> values;
  int label = kUnlabeled;
  Domain domain = Domain::kSource;

  bool has_label() const { return label != kUnlabeled; }
};

struct DatasetMeta {
  std::size_t length = 0;    // T
  std::size_t channels = 0;  // d
  std::size_t num_classes = 0;
  std::vector<std::string> class_names;
  Domain domain = Domain::kSource;
};

class Dataset {
 public:
  Dataset() = default;
  Dataset(DatasetMeta meta, std::vector<TimeSeriesSample> samples);

  const DatasetMeta& meta() const { return meta_; }
  const std::vector<TimeSeriesSample>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  bool fully_labeled() const;
  std::vector<std::size_t> class_counts() const;

  /// Stacks the selected samples into x[B, T, d].
  Tensor batch(std::span<const std::size_t> indices) const;
  std::vector<int> labels(std::span<const std::size_t> indices) const;

  /// Throws MetaMismatch / LabelOutOfRange on any inconsistency.
  void validate() const;

 private:
  DatasetMeta meta_;
  std::vector<TimeSeriesSample> samples_;
};

inline constexpr char kDatasetMagic[5] = "LGDS";
inline constexpr std::uint8_t kDatasetVersion = 1;
inline constexpr std::uint16_t kUnlabeledTag = 0xFFFF;

/// Writes `dir/meta.json` and `dir/data.bin`. data.bin is "LGDS", a version
/// byte, then per sample a u16 label (0xFFFF = unlabeled) followed by T*d
/// little-endian float32 values in channel-major order.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

/// Builds a dataset from per-sample CSV files (one row per time step, one
/// column per channel, no header) listed in an index CSV of `file,label`
/// rows; an empty label marks an unlabeled sample. Relative file paths are
/// resolved against the index file's directory. num_classes == 0 infers
/// C = max label + 1.
Dataset convert_csv(const std::filesystem::path& index_csv, Domain domain, std::size_t num_classes = 0);

struct SynthConfig {
  std::size_t length = 128;
  std::size_t channels = 3;
  std::size_t num_classes = 6;
  std::size_t samples_per_class = 100;
  std::size_t motif_length = 24;
  std::size_t shift_range = 16;  // per-motif jitter drawn uniformly from [-shift_range, shift_range]
  double target_scale = 1.6;
  double target_offset = 0.3;
  double noise_sigma = 0.05;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Two labeled datasets sharing one class-to-motif mapping. Each class is an
/// ordered pair of distinct motifs placed in an early and a late slot with
/// independent jitter over a smooth per-sample background. The target domain
/// applies x -> target_scale * x + target_offset; both domains get additive
/// Gaussian noise of noise_sigma.
std::pair<Dataset, Dataset> synthesize_uda_pair(const SynthConfig& config);

/// Motif pair (first slot, second slot) for each class.
std::vector<std::pair<std::size_t, std::size_t>> class_motif_pairs(std::size_t num_classes);
/// Clean motif of index `motif`: motif_length x channels, time-major.
std::vector<double> motif_template(std::size_t motif, std::size_t motif_length, std::size_t channels);

/// Matched-filter nearest-template classifier that knows the generator's
/// slot layout. Returns accuracy on a labeled synthetic dataset.
double template_oracle_accuracy(const SynthConfig& config, const Dataset& dataset);

/// Copy with every series rolled by `shift` steps along time (circularly).
Dataset circular_shift(const Dataset& dataset, long shift);

}  // namespace logora
