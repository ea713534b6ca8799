#include "logora/run_config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "logora/errors.hpp"

namespace logora {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::size_t parse_size(const std::string& key, const std::string& value) {
  std::size_t out = 0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  LOGORA_CHECK(ec == std::errc() && ptr == end, ErrorCode::kBadConfig,
               "key " + key + ": expected a non-negative integer, got \"" + value + "\"");
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  LOGORA_CHECK(ec == std::errc() && ptr == end && std::isfinite(out), ErrorCode::kBadConfig,
               "key " + key + ": expected a finite number, got \"" + value + "\"");
  return out;
}

std::vector<std::size_t> parse_size_list(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_size(key, trim(item)));
  LOGORA_CHECK(!out.empty(), ErrorCode::kBadConfig, "key " + key + ": empty list");
  return out;
}

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string format_path(const std::optional<std::filesystem::path>& p) { return p ? p->string() : std::string(); }

struct Field {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename Member>
Field size_field(std::string key, Member member) {
  return {key, [key, member](RunConfig& c, const std::string& v) { member(c) = parse_size(key, v); },
          [member](const RunConfig& c) { return std::to_string(member(c)); }};
}

template <typename Member>
Field double_field(std::string key, Member member) {
  return {key, [key, member](RunConfig& c, const std::string& v) { member(c) = parse_double(key, v); },
          [member](const RunConfig& c) { return format_double(member(c)); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    // model
    f.push_back(size_field("series_length", [](auto& c) -> auto& { return c.train.model.series_length; }));
    f.push_back(size_field("channels", [](auto& c) -> auto& { return c.train.model.channels; }));
    f.push_back(size_field("num_classes", [](auto& c) -> auto& { return c.train.model.num_classes; }));
    f.push_back(size_field("patch_len", [](auto& c) -> auto& { return c.train.model.patch_len; }));
    f.push_back(size_field("patch_stride", [](auto& c) -> auto& { return c.train.model.patch_stride; }));
    f.push_back(size_field("d_model", [](auto& c) -> auto& { return c.train.model.d_model; }));
    f.push_back(
        size_field("transformer_layers", [](auto& c) -> auto& { return c.train.model.transformer_layers; }));
    f.push_back(
        size_field("transformer_heads", [](auto& c) -> auto& { return c.train.model.transformer_heads; }));
    f.push_back({"kernel_sizes",
                 [](RunConfig& c, const std::string& v) { c.train.model.kernel_sizes = parse_size_list("kernel_sizes", v); },
                 [](const RunConfig& c) {
                   std::string out;
                   for (std::size_t i = 0; i < c.train.model.kernel_sizes.size(); ++i)
                     out += (i ? "," : "") + std::to_string(c.train.model.kernel_sizes[i]);
                   return out;
                 }});
    f.push_back(size_field("stages", [](auto& c) -> auto& { return c.train.model.stages; }));
    f.push_back(size_field("d_emb", [](auto& c) -> auto& { return c.train.model.d_emb; }));
    f.push_back(size_field("d_k", [](auto& c) -> auto& { return c.train.model.d_k; }));
    f.push_back(size_field("d_v", [](auto& c) -> auto& { return c.train.model.d_v; }));
    f.push_back(size_field("discriminator_hidden",
                           [](auto& c) -> auto& { return c.train.model.discriminator_hidden; }));
    // schedule
    f.push_back(size_field("epochs", [](auto& c) -> auto& { return c.train.epochs; }));
    f.push_back(size_field("batch_size", [](auto& c) -> auto& { return c.train.batch_size; }));
    f.push_back(double_field("learning_rate", [](auto& c) -> auto& { return c.train.learning_rate; }));
    f.push_back({"seed", [](RunConfig& c, const std::string& v) { c.train.seed = parse_size("seed", v); },
                 [](const RunConfig& c) { return std::to_string(c.train.seed); }});
    f.push_back(
        size_field("center_warmup_epochs", [](auto& c) -> auto& { return c.train.center_warmup_epochs; }));
    f.push_back(double_field("prototype_momentum", [](auto& c) -> auto& { return c.train.prototype_momentum; }));
    // loss weights
    f.push_back(double_field("lambda_domain", [](auto& c) -> auto& { return c.train.weights.lambda_domain; }));
    f.push_back(double_field("lambda_margin", [](auto& c) -> auto& { return c.train.weights.lambda_margin; }));
    f.push_back(double_field("lambda_dtw", [](auto& c) -> auto& { return c.train.weights.lambda_dtw; }));
    f.push_back(double_field("lambda_center", [](auto& c) -> auto& { return c.train.weights.lambda_center; }));
    f.push_back(double_field("alpha", [](auto& c) -> auto& { return c.train.weights.alpha; }));
    f.push_back(double_field("beta", [](auto& c) -> auto& { return c.train.weights.beta; }));
    // data
    f.push_back({"source", [](RunConfig& c, const std::string& v) { c.source = v; },
                 [](const RunConfig& c) { return format_path(c.source); }});
    f.push_back({"target", [](RunConfig& c, const std::string& v) { c.target = v; },
                 [](const RunConfig& c) { return format_path(c.target); }});
    f.push_back({"target_test", [](RunConfig& c, const std::string& v) { c.target_test = v; },
                 [](const RunConfig& c) { return format_path(c.target_test); }});
    return f;
  }();
  return table;
}

const Field* find_field(const std::string& key) {
  for (const auto& f : fields())
    if (f.key == key) return &f;
  return nullptr;
}

}  // namespace

RunConfig parse_run_config(std::string_view text) {
  RunConfig config;
  std::stringstream ss{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped.front() == '#') continue;
    const auto eq = stripped.find('=');
    const std::string where = "line " + std::to_string(line_no) + ": ";
    LOGORA_CHECK(eq != std::string::npos, ErrorCode::kBadConfig, where + "expected key = value");
    const std::string key = trim(std::string_view(stripped).substr(0, eq));
    const std::string value = trim(std::string_view(stripped).substr(eq + 1));
    const Field* field = find_field(key);
    LOGORA_CHECK(field != nullptr, ErrorCode::kBadConfig, where + "unknown key \"" + key + "\"");
    LOGORA_CHECK(!config.has(key), ErrorCode::kBadConfig, where + "key \"" + key + "\" given twice");
    LOGORA_CHECK(!value.empty(), ErrorCode::kBadConfig, where + "key \"" + key + "\" has no value");
    field->set(config, value);
    config.explicit_keys.insert(key);
  }
  config.train.validate_schedule();
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  LOGORA_CHECK(static_cast<bool>(in), ErrorCode::kBadConfig, "cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

const std::vector<std::string>& run_config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

std::string format_run_config(const RunConfig& config) {
  std::string out;
  for (const auto& f : fields()) {
    const std::string value = f.get(config);
    if (value.empty()) continue;
    out += f.key + " = " + value + "\n";
  }
  return out;
}

void bind_dataset_shape(RunConfig& config, const DatasetMeta& meta) {
  auto bind = [&](const char* key, std::size_t& slot, std::size_t value) {
    LOGORA_CHECK(!config.has(key) || slot == value, ErrorCode::kMetaMismatch,
                 std::string("config sets ") + key + " = " + std::to_string(slot) + " but the dataset has " +
                     std::to_string(value));
    slot = value;
  };
  bind("series_length", config.train.model.series_length, meta.length);
  bind("channels", config.train.model.channels, meta.channels);
  bind("num_classes", config.train.model.num_classes, meta.num_classes);
  config.train.validate();
}

void apply_ablation(LossWeights& weights, std::string_view names) {
  std::stringstream ss{std::string(names)};
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string name = trim(item);
    if (name.empty()) continue;
    if (name == "domain")
      weights.lambda_domain = 0.0;
    else if (name == "margin")
      weights.lambda_margin = 0.0;
    else if (name == "dtw")
      weights.lambda_dtw = 0.0;
    else if (name == "center")
      weights.lambda_center = 0.0;
    else
      fail(ErrorCode::kBadConfig, "unknown ablation \"" + name + "\" (expected domain, margin, dtw or center)");
  }
}

}  // namespace logora
