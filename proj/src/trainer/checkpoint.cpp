#include "trainer/checkpoint.hpp"

#include <charconv>
#include <map>
#include <sstream>
#include <vector>

#include <fmt/format.h>

#include "common/binary_io.hpp"
#include "common/error.hpp"
#include "common/files.hpp"

namespace eidc::trainer {
namespace {

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size()) {
    throw ConfigError("checkpoint manifest: bad value for " + key + ": '" + text + "'");
  }
  return value;
}

std::vector<int> parse_widths(const std::string& key, const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(parse_number<int>(key, part));
  if (out.size() < 2) throw ConfigError("checkpoint manifest: " + key + " needs at least two widths");
  for (int w : out) {
    if (w <= 0) throw ConfigError("checkpoint manifest: " + key + " has a non-positive width");
  }
  return out;
}

void write_blob(const std::filesystem::path& path, const nn::MlpParams& p) {
  ByteWriter w;
  w.put_f64s(p.flatten());
  write_file_atomic(path, std::span<const std::uint8_t>(w.bytes()));
}

nn::MlpParams read_blob(const std::filesystem::path& path, const std::vector<int>& widths) {
  nn::MlpParams p = nn::MlpParams::zeros(widths);
  const std::vector<std::uint8_t> bytes = read_binary_file(path);
  if (bytes.size() != p.parameter_count() * 8) {
    throw ConfigError(fmt::format("{}: {} bytes, manifest widths need {}", path.string(), bytes.size(),
                                  p.parameter_count() * 8));
  }
  ByteReader r(bytes);
  std::vector<double> flat(p.parameter_count());
  for (double& v : flat) v = r.get_f64();
  p.assign_flat(flat);
  return p;
}

}  // namespace

std::string manifest_text(const Checkpoint& c) {
  const Networks& n = c.nets;
  std::string s;
  s += fmt::format("format_version={}\n", kCheckpointFormat);
  s += fmt::format("representation={}\n", representation_name(n.representation));
  s += fmt::format("d1={}\nd2={}\nd3={}\n", kFeatureDim, kElseDim,
                   n.representation == Representation::kDynamic ? n.set_dim() : kFpSlots * kFeatureDim);
  if (n.representation == Representation::kDynamic) s += "encoder_widths=" + join(n.encoder.widths()) + "\n";
  s += "policy_widths=" + join(n.policy.widths()) + "\n";
  s += "value_widths=" + join(n.value.widths()) + "\n";
  s += fmt::format("encoder_output_scale={}\n", n.encoder.output_scale);
  s += fmt::format("value_output_scale={}\n", n.value.output_scale);
  s += fmt::format("iteration={}\n", c.iteration);
  s += fmt::format("seed={}\n", c.seed);
  s += fmt::format("rho={}\n", c.rho);
  return s;
}

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& c) {
  c.nets.validate();
  std::filesystem::create_directories(dir);
  if (c.nets.representation == Representation::kDynamic) write_blob(dir / "encoder.bin", c.nets.encoder);
  write_blob(dir / "policy.bin", c.nets.policy);
  write_blob(dir / "value.bin", c.nets.value);
  write_file_atomic(dir / "manifest.txt", manifest_text(c));
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  std::map<std::string, std::string> kv;
  std::stringstream in(read_text_file(dir / "manifest.txt"));
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("checkpoint manifest line {}: expected key=value", line_no));
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get = [&](const std::string& key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError("checkpoint manifest: missing " + key);
    return it->second;
  };
  if (parse_number<int>("format_version", get("format_version")) != kCheckpointFormat) {
    throw ConfigError("checkpoint manifest: unsupported format_version " + get("format_version"));
  }
  if (parse_number<int>("d1", get("d1")) != kFeatureDim || parse_number<int>("d2", get("d2")) != kElseDim) {
    throw ConfigError("checkpoint manifest: d1/d2 do not match this build");
  }
  Checkpoint c;
  Networks& n = c.nets;
  n.representation = parse_representation(get("representation"));
  const int d3 = parse_number<int>("d3", get("d3"));
  int set_dim = 0;
  if (n.representation == Representation::kDynamic) {
    n.encoder = read_blob(dir / "encoder.bin", parse_widths("encoder_widths", get("encoder_widths")));
    n.encoder.input_scale = encoder_input_scale();
    n.encoder.output_scale = parse_number<double>("encoder_output_scale", get("encoder_output_scale"));
    set_dim = n.encoder.output_width();
    if (set_dim != d3) throw ConfigError("checkpoint manifest: d3 does not match the encoder output width");
  } else if (d3 != kFpSlots * kFeatureDim) {
    throw ConfigError("checkpoint manifest: d3 does not match the fixed representation");
  }
  n.policy = read_blob(dir / "policy.bin", parse_widths("policy_widths", get("policy_widths")));
  n.value = read_blob(dir / "value.bin", parse_widths("value_widths", get("value_widths")));
  if (n.policy.input_width() != n.state_dim() || n.value.input_width() != n.state_dim()) {
    throw ConfigError("checkpoint manifest: policy/value input width does not match d2 + d3");
  }
  n.policy.input_scale = state_input_scale(n.representation, set_dim);
  n.value.input_scale = n.policy.input_scale;
  n.value.output_scale = parse_number<double>("value_output_scale", get("value_output_scale"));
  c.iteration = parse_number<std::int64_t>("iteration", get("iteration"));
  c.seed = parse_number<std::uint64_t>("seed", get("seed"));
  c.rho = parse_number<double>("rho", get("rho"));
  n.validate();
  return c;
}

}  // namespace eidc::trainer
