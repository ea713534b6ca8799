#include "logora/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "logora/binary_io.hpp"
#include "logora/errors.hpp"
#include "logora/random.hpp"

namespace logora {

namespace fs = std::filesystem;

std::string domain_name(Domain domain) { return domain == Domain::kSource ? "source" : "target"; }

Domain parse_domain(const std::string& name) {
  if (name == "source") return Domain::kSource;
  if (name == "target") return Domain::kTarget;
  fail(ErrorCode::kFormatError, "unknown domain \"" + name + "\" (expected source or target)");
}

Dataset::Dataset(DatasetMeta meta, std::vector<TimeSeriesSample> samples)
    : meta_(std::move(meta)), samples_(std::move(samples)) {
  if (meta_.class_names.empty())
    for (std::size_t c = 0; c < meta_.num_classes; ++c) meta_.class_names.push_back("class_" + std::to_string(c));
  validate();
}

bool Dataset::fully_labeled() const {
  return std::all_of(samples_.begin(), samples_.end(), [](const auto& s) { return s.has_label(); });
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(meta_.num_classes, 0);
  for (const auto& s : samples_)
    if (s.has_label()) counts[static_cast<std::size_t>(s.label)] += 1;
  return counts;
}

Tensor Dataset::batch(std::span<const std::size_t> indices) const {
  LOGORA_CHECK(!indices.empty(), ErrorCode::kEmptyDataset, "empty batch");
  const std::size_t block = meta_.length * meta_.channels;
  std::vector<double> values(indices.size() * block);
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const auto& s = samples_.at(indices[b]);
    std::copy(s.values.begin(), s.values.end(), values.begin() + static_cast<std::ptrdiff_t>(b * block));
  }
  return Tensor::from({indices.size(), meta_.length, meta_.channels}, std::move(values));
}

std::vector<int> Dataset::labels(std::span<const std::size_t> indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(samples_.at(i).label);
  return out;
}

void Dataset::validate() const {
  LOGORA_CHECK(meta_.length >= 1 && meta_.channels >= 1, ErrorCode::kMetaMismatch, "meta T and d must be positive");
  LOGORA_CHECK(meta_.class_names.size() == meta_.num_classes, ErrorCode::kMetaMismatch,
          "meta lists " + std::to_string(meta_.class_names.size()) + " class names for C=" +
              std::to_string(meta_.num_classes));
  const std::size_t block = meta_.length * meta_.channels;
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const auto& s = samples_[i];
    LOGORA_CHECK(s.values.size() == block, ErrorCode::kMetaMismatch,
            "sample " + std::to_string(i) + " has " + std::to_string(s.values.size()) + " values, meta expects " +
                std::to_string(block));
    LOGORA_CHECK(s.label == kUnlabeled || (s.label >= 0 && static_cast<std::size_t>(s.label) < meta_.num_classes),
            ErrorCode::kLabelOutOfRange, "sample " + std::to_string(i) + " label " + std::to_string(s.label));
  }
}

// ---------------------------------------------------------------------------
// On-disk format

void save_dataset(const Dataset& dataset, const fs::path& dir) {
  fs::create_directories(dir);
  const auto& meta = dataset.meta();
  nlohmann::json j = {{"T", meta.length},
                      {"d", meta.channels},
                      {"C", meta.num_classes},
                      {"class_names", meta.class_names},
                      {"domain", domain_name(meta.domain)}};
  {
    std::ofstream out(dir / "meta.json", std::ios::trunc);
    LOGORA_CHECK(static_cast<bool>(out), ErrorCode::kIoError, "cannot write " + (dir / "meta.json").string());
    out << j.dump(2) << '\n';
  }
  std::ofstream out(dir / "data.bin", std::ios::binary | std::ios::trunc);
  LOGORA_CHECK(static_cast<bool>(out), ErrorCode::kIoError, "cannot write " + (dir / "data.bin").string());
  binary::write_magic(out, kDatasetMagic, kDatasetVersion);
  for (const auto& s : dataset.samples()) {
    binary::write_le<std::uint16_t>(out, s.has_label() ? static_cast<std::uint16_t>(s.label) : kUnlabeledTag);
    for (std::size_t c = 0; c < meta.channels; ++c)
      for (std::size_t t = 0; t < meta.length; ++t) binary::write_le<float>(out, s.values[t * meta.channels + c]);
  }
  LOGORA_CHECK(static_cast<bool>(out), ErrorCode::kIoError, "write failed for " + (dir / "data.bin").string());
}

Dataset load_dataset(const fs::path& dir) {
  LOGORA_CHECK(fs::is_directory(dir), ErrorCode::kIoError, "dataset directory " + dir.string() + " does not exist");
  DatasetMeta meta;
  {
    std::ifstream in(dir / "meta.json");
    LOGORA_CHECK(static_cast<bool>(in), ErrorCode::kIoError, "missing " + (dir / "meta.json").string());
    try {
      const auto j = nlohmann::json::parse(in);
      meta.length = j.at("T").get<std::size_t>();
      meta.channels = j.at("d").get<std::size_t>();
      meta.num_classes = j.at("C").get<std::size_t>();
      meta.class_names = j.at("class_names").get<std::vector<std::string>>();
      meta.domain = parse_domain(j.at("domain").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kFormatError, std::string("bad meta.json: ") + e.what());
    }
  }
  LOGORA_CHECK(meta.length >= 1 && meta.channels >= 1, ErrorCode::kMetaMismatch, "meta T and d must be positive");
  const fs::path data_path = dir / "data.bin";
  std::ifstream in(data_path, std::ios::binary);
  LOGORA_CHECK(static_cast<bool>(in), ErrorCode::kIoError, "missing " + data_path.string());
  const auto version = binary::read_magic(in, kDatasetMagic);
  LOGORA_CHECK(version == kDatasetVersion, ErrorCode::kFormatError, "unsupported dataset version " + std::to_string(version));
  const auto payload = fs::file_size(data_path) - 5;
  const std::size_t record = 2 + 4 * meta.length * meta.channels;
  LOGORA_CHECK(payload % record == 0, ErrorCode::kMetaMismatch,
          "data.bin payload of " + std::to_string(payload) + " bytes is not a whole number of T=" +
              std::to_string(meta.length) + ", d=" + std::to_string(meta.channels) + " samples");
  const std::size_t count = payload / record;
  std::vector<TimeSeriesSample> samples(count);
  for (auto& s : samples) {
    const auto tag = binary::read_le<std::uint16_t>(in, "label");
    s.label = tag == kUnlabeledTag ? kUnlabeled : static_cast<int>(tag);
    s.domain = meta.domain;
    s.values.resize(meta.length * meta.channels);
    for (std::size_t c = 0; c < meta.channels; ++c)
      for (std::size_t t = 0; t < meta.length; ++t) {
        const float v = binary::read_le<float>(in, "sample value");
        LOGORA_CHECK(std::isfinite(v), ErrorCode::kFormatError, "non-finite sample value");
        s.values[t * meta.channels + c] = v;
      }
  }
  return Dataset(std::move(meta), std::move(samples));
}

// ---------------------------------------------------------------------------
// CSV ingestion

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_number(const std::string& text, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    LOGORA_CHECK(used == text.size() && std::isfinite(v), ErrorCode::kFormatError, "bad number \"" + text + "\" in " + where);
    return v;
  } catch (const std::logic_error&) {
    fail(ErrorCode::kFormatError, "bad number \"" + text + "\" in " + where);
  }
}

}  // namespace

Dataset convert_csv(const fs::path& index_csv, Domain domain, std::size_t num_classes) {
  std::ifstream index(index_csv);
  LOGORA_CHECK(static_cast<bool>(index), ErrorCode::kIoError, "cannot open index " + index_csv.string());
  const fs::path base = index_csv.parent_path();
  std::vector<TimeSeriesSample> samples;
  std::size_t length = 0, channels = 0;
  int max_label = -1;
  std::string line;
  while (std::getline(index, line)) {
    line = trim(line);
    if (line.empty() || line.rfind("file,", 0) == 0) continue;
    const auto fields = split_csv_line(line);
    LOGORA_CHECK(!fields.empty() && fields.size() <= 2, ErrorCode::kFormatError, "index row \"" + line + "\" is not file,label");
    TimeSeriesSample sample;
    sample.domain = domain;
    if (fields.size() == 2 && !fields[1].empty()) {
      const double label = parse_number(fields[1], index_csv.string());
      LOGORA_CHECK(label >= 0 && label == std::floor(label) && label < 0xFFFF, ErrorCode::kLabelOutOfRange,
              "label \"" + fields[1] + "\" is not a class index");
      sample.label = static_cast<int>(label);
      max_label = std::max(max_label, sample.label);
    }
    fs::path file = fields[0];
    if (file.is_relative()) file = base / file;
    std::ifstream in(file);
    LOGORA_CHECK(static_cast<bool>(in), ErrorCode::kIoError, "cannot open sample " + file.string());
    std::size_t rows = 0;
    std::string row;
    while (std::getline(in, row)) {
      row = trim(row);
      if (row.empty()) continue;
      const auto cols = split_csv_line(row);
      if (channels == 0) channels = cols.size();
      LOGORA_CHECK(cols.size() == channels, ErrorCode::kMetaMismatch,
              file.string() + " row " + std::to_string(rows) + " has " + std::to_string(cols.size()) +
                  " channels, expected " + std::to_string(channels));
      for (const auto& c : cols) sample.values.push_back(static_cast<float>(parse_number(c, file.string())));
      ++rows;
    }
    if (length == 0) length = rows;
    LOGORA_CHECK(rows == length, ErrorCode::kMetaMismatch,
            file.string() + " has " + std::to_string(rows) + " time steps, expected " + std::to_string(length));
    samples.push_back(std::move(sample));
  }
  LOGORA_CHECK(!samples.empty(), ErrorCode::kEmptyDataset, "index " + index_csv.string() + " lists no samples");
  DatasetMeta meta;
  meta.length = length;
  meta.channels = channels;
  meta.num_classes = num_classes > 0 ? num_classes : static_cast<std::size_t>(std::max(max_label + 1, 1));
  meta.domain = domain;
  return Dataset(std::move(meta), std::move(samples));
}

// ---------------------------------------------------------------------------
// Synthetic generator

namespace {

constexpr std::size_t kMotifCount = 6;
constexpr double kBackgroundAmplitude = 0.2;

// Channel loadings of each motif over (up to) three base channels.
constexpr double kLoadings[kMotifCount][3] = {
    {1.0, 0.4, 0.0}, {0.0, 1.0, 0.3}, {0.3, 0.0, 1.0}, {1.0, 0.0, 0.6}, {0.5, 0.5, 0.0}, {0.0, 0.6, 1.0},
};

double hann(double u) { return 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * u); }

double motif_shape(std::size_t motif, double u) {
  constexpr double pi = std::numbers::pi;
  switch (motif) {
    case 0: return std::exp(-0.5 * std::pow((u - 0.5) / 0.15, 2));
    case 1: return std::sin(4.0 * pi * u) * hann(u);
    case 2: return u < 0.8 ? u / 0.8 : (1.0 - u) / 0.2;
    case 3: return -std::exp(-0.5 * std::pow((u - 0.5) / 0.2, 2));
    case 4: return std::sin(2.0 * pi * (u + 3.0 * u * u)) * hann(u);
    default: {
      const double rise = std::clamp((u - 0.1) / 0.2, 0.0, 1.0);
      const double fall = std::clamp((0.9 - u) / 0.2, 0.0, 1.0);
      return std::min(rise, fall);
    }
  }
}

std::size_t motifs_needed(std::size_t num_classes) {
  std::size_t k = 2;
  while (k * (k - 1) < num_classes) ++k;
  return k;
}

struct SlotLayout {
  long first = 0;
  long second = 0;
};

SlotLayout slot_layout(const SynthConfig& c) {
  return {static_cast<long>(c.length / 4) - static_cast<long>(c.motif_length / 2),
          static_cast<long>(3 * c.length / 4) - static_cast<long>(c.motif_length / 2)};
}

}  // namespace

void SynthConfig::validate() const {
  auto check = [](bool ok, const std::string& msg) { LOGORA_CHECK(ok, ErrorCode::kBadConfig, msg); };
  check(length >= 8 && channels >= 1, "synthetic series need T >= 8 and d >= 1");
  check(num_classes >= 2 && num_classes <= kMotifCount * (kMotifCount - 1),
        "num_classes must lie in [2, " + std::to_string(kMotifCount * (kMotifCount - 1)) + "]");
  check(samples_per_class >= 1, "samples_per_class must be positive");
  check(motif_length >= 2 && motif_length < length, "motif_length must lie in [2, T)");
  check(shift_range + motif_length <= length, "shift_range + motif_length must not exceed T");
  const auto slots = slot_layout(*this);
  const long r = static_cast<long>(shift_range), l = static_cast<long>(motif_length);
  check(slots.first - r >= 0 && slots.second + r + l <= static_cast<long>(length) && slots.first + r + l <= slots.second - r,
        "motif slots with this shift_range overlap or leave the series; reduce shift_range or motif_length");
  check(target_scale > 0.0 && std::isfinite(target_scale), "target_scale must be positive");
  check(std::isfinite(target_offset), "target_offset must be finite");
  check(noise_sigma >= 0.0 && std::isfinite(noise_sigma), "noise_sigma must be >= 0");
}

std::vector<std::pair<std::size_t, std::size_t>> class_motif_pairs(std::size_t num_classes) {
  const std::size_t k = motifs_needed(num_classes);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  // Both orders of each unordered pair sit next to each other so that
  // neighbouring classes differ only in global arrangement.
  for (std::size_t a = 0; a < k && pairs.size() < num_classes; ++a)
    for (std::size_t b = a + 1; b < k && pairs.size() < num_classes; ++b) {
      pairs.emplace_back(a, b);
      if (pairs.size() < num_classes) pairs.emplace_back(b, a);
    }
  return pairs;
}

std::vector<double> motif_template(std::size_t motif, std::size_t motif_length, std::size_t channels) {
  std::vector<double> out(motif_length * channels);
  for (std::size_t t = 0; t < motif_length; ++t) {
    const double u = static_cast<double>(t) / static_cast<double>(motif_length - 1);
    const double s = motif_shape(motif % kMotifCount, u);
    for (std::size_t c = 0; c < channels; ++c) out[t * channels + c] = s * kLoadings[motif % kMotifCount][c % 3];
  }
  return out;
}

std::pair<Dataset, Dataset> synthesize_uda_pair(const SynthConfig& config) {
  config.validate();
  const auto pairs = class_motif_pairs(config.num_classes);
  const std::size_t k = motifs_needed(config.num_classes);
  std::vector<std::vector<double>> motifs;
  for (std::size_t m = 0; m < k; ++m) motifs.push_back(motif_template(m, config.motif_length, config.channels));
  const auto slots = slot_layout(config);
  const long r = static_cast<long>(config.shift_range);
  const std::size_t T = config.length, d = config.channels, L = config.motif_length;

  Rng root(config.seed);
  auto generate = [&](Domain domain, Rng rng) {
    const double gain = domain == Domain::kTarget ? config.target_scale : 1.0;
    const double offset = domain == Domain::kTarget ? config.target_offset : 0.0;
    std::vector<TimeSeriesSample> samples;
    samples.reserve(config.num_classes * config.samples_per_class);
    std::vector<double> clean(T * d);
    for (std::size_t cls = 0; cls < config.num_classes; ++cls)
      for (std::size_t n = 0; n < config.samples_per_class; ++n) {
        for (std::size_t c = 0; c < d; ++c) {
          const double freq = rng.uniform(0.5, 1.5);
          const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
          for (std::size_t t = 0; t < T; ++t)
            clean[t * d + c] =
                kBackgroundAmplitude * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(t) / T + phase);
        }
        const long starts[2] = {slots.first + rng.integer(-r, r), slots.second + rng.integer(-r, r)};
        const std::size_t ids[2] = {pairs[cls].first, pairs[cls].second};
        for (int slot = 0; slot < 2; ++slot)
          for (std::size_t t = 0; t < L; ++t)
            for (std::size_t c = 0; c < d; ++c)
              clean[(static_cast<std::size_t>(starts[slot]) + t) * d + c] += motifs[ids[slot]][t * d + c];
        TimeSeriesSample s;
        s.label = static_cast<int>(cls);
        s.domain = domain;
        s.values.resize(T * d);
        for (std::size_t i = 0; i < T * d; ++i)
          s.values[i] = static_cast<float>(gain * clean[i] + offset + config.noise_sigma * rng.normal());
        samples.push_back(std::move(s));
      }
    DatasetMeta meta;
    meta.length = T;
    meta.channels = d;
    meta.num_classes = config.num_classes;
    for (const auto& [a, b] : pairs) meta.class_names.push_back("motif" + std::to_string(a) + "_then_motif" + std::to_string(b));
    meta.domain = domain;
    return Dataset(std::move(meta), std::move(samples));
  };
  Rng source_rng = root.fork();
  Rng target_rng = root.fork();
  return {generate(Domain::kSource, source_rng), generate(Domain::kTarget, target_rng)};
}

double template_oracle_accuracy(const SynthConfig& config, const Dataset& dataset) {
  config.validate();
  LOGORA_CHECK(!dataset.empty(), ErrorCode::kEmptyDataset, "oracle on an empty dataset");
  LOGORA_CHECK(dataset.fully_labeled(), ErrorCode::kMissingLabels, "oracle needs labels");
  const auto pairs = class_motif_pairs(config.num_classes);
  const std::size_t k = motifs_needed(config.num_classes);
  const std::size_t d = config.channels, L = config.motif_length;
  const auto slots = slot_layout(config);
  const long r = static_cast<long>(config.shift_range);
  std::vector<std::vector<double>> motifs;
  for (std::size_t m = 0; m < k; ++m) motifs.push_back(motif_template(m, L, d));

  std::size_t correct = 0;
  for (const auto& s : dataset.samples()) {
    // best[slot][m]: smallest squared error of motif m anywhere in the slot's jitter window.
    double best[2][kMotifCount];
    for (int slot = 0; slot < 2; ++slot) {
      const long base = slot == 0 ? slots.first : slots.second;
      for (std::size_t m = 0; m < k; ++m) {
        best[slot][m] = std::numeric_limits<double>::infinity();
        for (long j = -r; j <= r; ++j) {
          const std::size_t start = static_cast<std::size_t>(base + j);
          double err = 0.0;
          for (std::size_t i = 0; i < L * d; ++i) {
            const double diff = s.values[start * d + i] - motifs[m][i];
            err += diff * diff;
          }
          best[slot][m] = std::min(best[slot][m], err);
        }
      }
    }
    std::size_t prediction = 0;
    double score = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < pairs.size(); ++c) {
      const double total = best[0][pairs[c].first] + best[1][pairs[c].second];
      if (total < score) {
        score = total;
        prediction = c;
      }
    }
    if (static_cast<int>(prediction) == s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

Dataset circular_shift(const Dataset& dataset, long shift) {
  const std::size_t T = dataset.meta().length, d = dataset.meta().channels;
  const long period = static_cast<long>(T);
  const long s = ((shift % period) + period) % period;
  std::vector<TimeSeriesSample> shifted;
  shifted.reserve(dataset.size());
  for (const auto& sample : dataset.samples()) {
    TimeSeriesSample out = sample;
    for (std::size_t t = 0; t < T; ++t) {
      const std::size_t src = static_cast<std::size_t>((static_cast<long>(t) - s + period) % period);
      std::copy_n(sample.values.begin() + static_cast<std::ptrdiff_t>(src * d), d,
                  out.values.begin() + static_cast<std::ptrdiff_t>(t * d));
    }
    shifted.push_back(std::move(out));
  }
  return Dataset(dataset.meta(), std::move(shifted));
}

}  // namespace logora
