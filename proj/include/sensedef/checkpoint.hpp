#ifndef SENSEDEF_CHECKPOINT_HPP
#define SENSEDEF_CHECKPOINT_HPP

#include <bit>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "sensedef/error.hpp"
#include "sensedef/trainer.hpp"

namespace sensedef {

// Layout: the line "GVEC1", a one-line JSON manifest, then little-endian f32
// payloads in manifest order. Offsets in the manifest are payload bytes.
inline constexpr const char* kCheckpointMagic = "GVEC1";
inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline void put_f32(std::string& buf, double x) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(x));
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

inline double get_f32(const unsigned char* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return static_cast<double>(std::bit_cast<float>(bits));
}

struct Block {
  std::string name;
  std::size_t rows;
  std::size_t cols;
  const std::vector<double>* data;
};

inline std::vector<Block> checkpoint_blocks(const TrainingState& st, std::vector<std::vector<double>>& scratch) {
  std::vector<Block> blocks;
  for (const auto& t : st.params.tensors) blocks.push_back({t.name, t.rows, t.cols, &t.data});
  for (std::size_t i = 0; i < st.params.tensors.size(); ++i) {
    const auto& t = st.params.tensors[i];
    blocks.push_back({"opt.avg_sq_grad/" + t.name, t.rows, t.cols, &st.param_opt.slots[i].avg_sq_grad});
    blocks.push_back({"opt.avg_sq_update/" + t.name, t.rows, t.cols, &st.param_opt.slots[i].avg_sq_update});
  }
  const std::size_t n = st.senses.size(), d = st.senses.dim();
  scratch.assign(2, std::vector<double>(n * d));
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t k = 0; k < d; ++k) {
      scratch[0][r * d + k] = st.sense_opt[r].avg_sq_grad[k];
      scratch[1][r * d + k] = st.sense_opt[r].avg_sq_update[k];
    }
  blocks.push_back({"senses", n, d, &st.senses.data()});
  blocks.push_back({"senses.opt.avg_sq_grad", n, d, &scratch[0]});
  blocks.push_back({"senses.opt.avg_sq_update", n, d, &scratch[1]});
  return blocks;
}

} // namespace detail

inline void write_checkpoint(std::ostream& out, const TrainingState& st) {
  if (st.sense_opt.size() != st.senses.size() || st.param_opt.slots.size() != st.params.tensors.size())
    throw ArgumentError("checkpoint: optimizer state does not match parameters");
  std::vector<std::vector<double>> scratch;
  const auto blocks = detail::checkpoint_blocks(st, scratch);

  nlohmann::json tensors = nlohmann::json::array();
  std::string payload;
  for (const auto& b : blocks) {
    tensors.push_back({{"name", b.name}, {"shape", {b.rows, b.cols}}, {"offset", payload.size()}});
    for (double x : *b.data) detail::put_f32(payload, x);
  }
  std::vector<std::string> tags;
  for (auto t : st.senses.tags()) tags.emplace_back(provenance_name(t));
  const auto& cfg = st.param_opt.config;
  nlohmann::json manifest = {
      {"version", kCheckpointVersion},
      {"cell", cell_name(st.params.kind)},
      {"dims", {{"input", st.params.dims.input}, {"hidden", st.params.dims.hidden}, {"output", st.params.dims.output}}},
      {"adadelta", {{"rho", cfg.rho}, {"eps", cfg.eps}, {"rate", cfg.rate}}},
      {"senses", {{"dim", st.senses.dim()}, {"ids", st.senses.ids()}, {"tags", tags}}},
      {"tensors", tensors},
      {"payload_bytes", payload.size()},
  };
  out << kCheckpointMagic << '\n' << manifest.dump() << '\n';
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
}

inline TrainingState read_checkpoint(std::istream& in, const std::string& name = "<stream>") {
  std::string magic;
  if (!std::getline(in, magic) || magic != kCheckpointMagic)
    throw DataError(name + ": not a checkpoint (bad magic or version)");
  std::string line;
  if (!std::getline(in, line)) throw DataError(name + ": truncated checkpoint (no manifest)");
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(name + ": corrupt manifest: " + e.what());
  }
  const std::string payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  TrainingState st;
  try {
    if (m.at("version").get<int>() != kCheckpointVersion) throw DataError(name + ": unsupported checkpoint version");
    const auto kind = parse_cell(m.at("cell").get<std::string>());
    if (!kind) throw DataError(name + ": unknown cell kind");
    const auto& dj = m.at("dims");
    const ModelDims dims{dj.at("input").get<std::size_t>(), dj.at("hidden").get<std::size_t>(),
                         dj.at("output").get<std::size_t>()};
    const auto& aj = m.at("adadelta");
    const AdadeltaConfig ada{aj.at("rho").get<double>(), aj.at("eps").get<double>(), aj.at("rate").get<double>()};
    if (m.at("payload_bytes").get<std::size_t>() != payload.size())
      throw DataError(name + ": truncated checkpoint (payload is " + std::to_string(payload.size()) + " bytes, expected " +
                      std::to_string(m.at("payload_bytes").get<std::size_t>()) + ")");

    st.params = make_params(*kind, dims);
    st.param_opt = AdadeltaState(ada, st.params.tensors);
    const auto& sj = m.at("senses");
    const auto ids = sj.at("ids").get<std::vector<std::string>>();
    const auto tag_names = sj.at("tags").get<std::vector<std::string>>();
    if (ids.size() != tag_names.size()) throw DataError(name + ": sense ids and tags differ in length");
    const std::size_t d = sj.at("dim").get<std::size_t>();
    st.senses = SenseTable(d);
    const Vector zero(d, 0.0);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const auto tag = parse_provenance(tag_names[i]);
      if (!tag) throw DataError(name + ": unknown provenance tag '" + tag_names[i] + "'");
      st.senses.add(ids[i], zero, *tag);
    }
    st.sense_opt.assign(ids.size(), AdadeltaSlot(d));

    std::vector<std::vector<double>> scratch;
    const auto expected = detail::checkpoint_blocks(st, scratch);
    const auto& tj = m.at("tensors");
    if (tj.size() != expected.size()) throw DataError(name + ": unexpected tensor count");
    std::vector<std::vector<double>> loaded;
    for (std::size_t i = 0; i < expected.size(); ++i) {
      const auto& e = expected[i];
      const auto& t = tj[i];
      const auto shape = t.at("shape").get<std::vector<std::size_t>>();
      if (t.at("name").get<std::string>() != e.name || shape.size() != 2 || shape[0] != e.rows || shape[1] != e.cols)
        throw DataError(name + ": tensor " + std::to_string(i) + " does not match the manifest layout");
      const auto offset = t.at("offset").get<std::size_t>();
      const std::size_t count = e.rows * e.cols;
      if (offset + 4 * count > payload.size()) throw DataError(name + ": truncated tensor '" + e.name + "'");
      const auto* p = reinterpret_cast<const unsigned char*>(payload.data()) + offset;
      std::vector<double> values(count);
      for (std::size_t k = 0; k < count; ++k) values[k] = detail::get_f32(p + 4 * k);
      loaded.push_back(std::move(values));
    }
    std::size_t b = 0;
    for (auto& t : st.params.tensors) t.data = loaded[b++];
    for (auto& slot : st.param_opt.slots) {
      slot.avg_sq_grad = loaded[b++];
      slot.avg_sq_update = loaded[b++];
    }
    auto rows = st.senses.mutable_data();
    std::copy(loaded[b].begin(), loaded[b].end(), rows.begin());
    for (std::size_t r = 0; r < ids.size(); ++r) {
      auto from = [&](std::size_t blk) {
        return std::vector<double>(loaded[blk].begin() + static_cast<std::ptrdiff_t>(r * d),
                                   loaded[blk].begin() + static_cast<std::ptrdiff_t>((r + 1) * d));
      };
      st.sense_opt[r].avg_sq_grad = from(b + 1);
      st.sense_opt[r].avg_sq_update = from(b + 2);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(name + ": malformed manifest: " + e.what());
  } catch (const ArgumentError& e) {
    throw DataError(name + ": inconsistent checkpoint: " + e.what());
  }
  return st;
}

inline void save_checkpoint(const TrainingState& st, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint '" + path + "'");
  write_checkpoint(out, st);
  if (!out) throw DataError("failed writing checkpoint '" + path + "'");
}

inline TrainingState load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  return read_checkpoint(in, path);
}

} // namespace sensedef

#endif // SENSEDEF_CHECKPOINT_HPP
