#include "abstractnet/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>

namespace abstractnet {
namespace {

std::string hex_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::hex);
  return std::string(buf, res.ptr);
}

double parse_hex_double(const std::string& token) {
  double v = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  bool negative = false;
  if (first != last && *first == '-') {
    negative = true;
    ++first;
  }
  const auto res = std::from_chars(first, last, v, std::chars_format::hex);
  if (res.ec != std::errc() || res.ptr != last) throw CheckpointError("bad value token: " + token);
  return negative ? -v : v;
}

}  // namespace

std::string encode_checkpoint(const ControlNetBlock& cb) {
  std::string out = "abstractnet-checkpoint 1\n";
  out += std::string("activation ") + activation_name(cb.locked.activation) + " " +
         activation_name(cb.copy.activation) + "\n";
  const auto names = ControlNetBlock::param_names();
  const auto params = cb.all_params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Param& p = *params[i];
    out += "param " + names[i] + (p.locked ? " locked " : " trainable ") +
           std::to_string(p.value.rank());
    for (std::size_t e : p.value.shape()) out += " " + std::to_string(e);
    for (double v : p.value.values()) out += " " + hex_double(v);
    out += "\n";
  }
  return out;
}

ControlNetBlock decode_checkpoint(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "abstractnet-checkpoint 1") {
    throw CheckpointError("missing checkpoint header");
  }
  ControlNetBlock cb;
  {
    if (!std::getline(in, line)) throw CheckpointError("missing activation line");
    std::istringstream ls(line);
    std::string tag, locked_act, copy_act;
    ls >> tag >> locked_act >> copy_act;
    if (tag != "activation" || !ls) throw CheckpointError("malformed activation line");
    try {
      cb.locked.activation = parse_activation(locked_act);
      cb.copy.activation = parse_activation(copy_act);
    } catch (const std::invalid_argument& e) {
      throw CheckpointError(e.what());
    }
  }
  const auto names = ControlNetBlock::param_names();
  auto params = cb.all_params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!std::getline(in, line)) throw CheckpointError("missing param " + names[i]);
    std::istringstream ls(line);
    std::string tag, name, flag;
    std::size_t rank = 0;
    ls >> tag >> name >> flag >> rank;
    if (!ls || tag != "param" || name != names[i] || (flag != "locked" && flag != "trainable") ||
        rank == 0 || rank > 4) {
      throw CheckpointError("malformed param line for " + names[i]);
    }
    Shape shape(rank);
    std::size_t count = 1;
    for (auto& e : shape) {
      if (!(ls >> e) || e == 0 || e > 4096) throw CheckpointError("bad extent for " + name);
      count *= e;
    }
    std::vector<double> values;
    values.reserve(count);
    std::string token;
    while (ls >> token) values.push_back(parse_hex_double(token));
    if (values.size() != count) throw CheckpointError("value count mismatch for " + name);
    *params[i] = Param(Tensor(std::move(shape), std::move(values)), flag == "locked");
  }
  // Structural consistency: the composition must be well-typed.
  const std::size_t c = cb.locked.channels();
  auto check = [&](bool ok, const char* what) {
    if (!ok) throw CheckpointError(std::string("inconsistent checkpoint: ") + what);
  };
  check(cb.locked.conv1_weight.value.shape() == Shape({c, c, 3, 3}), "locked conv1 weight");
  check(cb.locked.conv2_weight.value.shape() == Shape({c, c, 3, 3}), "locked conv2 weight");
  check(cb.locked.conv2_bias.value.shape() == Shape({c}), "locked conv2 bias");
  check(cb.copy.conv1_weight.value.shape() == cb.locked.conv1_weight.value.shape(), "copy conv1 weight");
  check(cb.copy.conv2_weight.value.shape() == cb.locked.conv2_weight.value.shape(), "copy conv2 weight");
  check(cb.copy.conv1_bias.value.shape() == Shape({c}), "copy conv1 bias");
  check(cb.copy.conv2_bias.value.shape() == Shape({c}), "copy conv2 bias");
  check(cb.z1.weight.value.rank() == 4 && cb.z1.weight.value.extent(0) == c &&
            cb.z1.weight.value.extent(2) == 1 && cb.z1.weight.value.extent(3) == 1,
        "z1 weight");
  check(cb.z1.bias.value.shape() == Shape({c}), "z1 bias");
  check(cb.z2.weight.value.shape() == Shape({c, c, 1, 1}), "z2 weight");
  check(cb.z2.bias.value.shape() == Shape({c}), "z2 bias");
  return cb;
}

void save_checkpoint(const ControlNetBlock& cb, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write " + path.string());
  const std::string text = encode_checkpoint(cb);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw CheckpointError("write failed: " + path.string());
}

ControlNetBlock load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  return decode_checkpoint({std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()});
}

}  // namespace abstractnet
