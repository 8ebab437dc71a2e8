#include "smdn/model.hpp"

#include <fstream>
#include <string>

#include "binary_io.hpp"
#include "smdn/error.hpp"

namespace smdn::model {

namespace {

constexpr char kMagic[4] = {'S', 'M', 'D', 'N'};

void write_values(io::Writer& w, std::span<const double> v) {
  w.scalar<std::uint64_t>(v.size());
  w.array(v);
}

std::vector<double> read_values(io::Reader& r, std::size_t expected, const char* field) {
  const auto n = r.scalar<std::uint64_t>(field);
  if (n != expected) throw FormatError(field, "expected " + std::to_string(expected) + " values, found " + std::to_string(n));
  return r.array<double>(n, field);
}

}  // namespace

mdn::MixtureParams Model::predict(std::span<const double> raw) const {
  if (raw.size() != layout.dim()) {
    throw InvalidInput("feature vector has length " + std::to_string(raw.size()) + ", model expects " +
                       std::to_string(layout.dim()));
  }
  return mdn::forward(params, standardizer.apply(raw));
}

void write(const Model& m, std::ostream& out) {
  io::Writer w(out);
  w.bytes(kMagic, sizeof kMagic);
  w.scalar<std::uint32_t>(kFormatVersion);
  const nlohmann::json header{{"mdn", m.params.config().to_json()},
                              {"layout", m.layout.to_json()},
                              {"metadata", m.metadata},
                              {"has_train_state", m.train_state.has_value()}};
  w.string(header.dump());
  write_values(w, m.standardizer.mean());
  write_values(w, m.standardizer.scale());
  write_values(w, m.params.values());
  if (m.train_state) {
    const auto& s = *m.train_state;
    write_values(w, s.current.values());
    write_values(w, s.adam.m);
    write_values(w, s.adam.v);
    w.scalar<std::uint64_t>(s.adam.step);
    w.scalar<double>(s.scheduler.learning_rate);
    w.scalar<double>(s.scheduler.best);
    w.scalar<std::uint8_t>(s.scheduler.has_best);
    w.scalar<std::uint64_t>(s.scheduler.bad_epochs);
    w.scalar<std::uint64_t>(s.epochs_done);
    w.scalar<double>(s.best_validation);
    w.scalar<std::uint8_t>(s.has_best);
  }
  if (!out) throw std::runtime_error("failed to write model");
}

Model read(std::istream& in) {
  io::Reader r(in);
  char magic[4];
  r.bytes(magic, sizeof magic, "magic");
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) throw FormatError("magic", "not an SMDN model file");
  const auto version = r.scalar<std::uint32_t>("version");
  if (version != kFormatVersion) throw FormatError("version", "unsupported model version " + std::to_string(version));

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.string("header"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("header", e.what());
  }

  Model m;
  try {
    m.params = mdn::MdnParams(mdn::MdnConfig::from_json(header.at("mdn")));
    m.layout = features::FeatureLayout::from_json(header.at("layout"));
    m.metadata = header.value("metadata", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("header", e.what());
  } catch (const InvalidInput& e) {
    throw FormatError("header", e.what());
  }
  const std::size_t dim = m.layout.dim();
  if (m.params.config().input_dim != dim) throw FormatError("input_dim", "network input does not match the layout");

  auto mean = read_values(r, dim, "standardizer.mean");
  auto scale = read_values(r, dim, "standardizer.scale");
  try {
    m.standardizer = features::Standardizer(std::move(mean), std::move(scale));
  } catch (const InvalidInput& e) {
    throw FormatError("standardizer", e.what());
  }
  const auto weights = read_values(r, m.params.size(), "weights");
  std::copy(weights.begin(), weights.end(), m.params.values().begin());

  if (header.value("has_train_state", false)) {
    mdn::TrainState s;
    s.current = mdn::MdnParams(m.params.config());
    const auto cur = read_values(r, m.params.size(), "train_state.current");
    std::copy(cur.begin(), cur.end(), s.current.values().begin());
    s.adam.m = read_values(r, m.params.size(), "train_state.adam_m");
    s.adam.v = read_values(r, m.params.size(), "train_state.adam_v");
    s.adam.step = r.scalar<std::uint64_t>("train_state.adam_step");
    s.scheduler.learning_rate = r.scalar<double>("train_state.learning_rate");
    s.scheduler.best = r.scalar<double>("train_state.scheduler_best");
    s.scheduler.has_best = r.scalar<std::uint8_t>("train_state.scheduler_has_best") != 0;
    s.scheduler.bad_epochs = r.scalar<std::uint64_t>("train_state.bad_epochs");
    s.epochs_done = r.scalar<std::uint64_t>("train_state.epochs_done");
    s.best_validation = r.scalar<double>("train_state.best_validation");
    s.has_best = r.scalar<std::uint8_t>("train_state.has_best") != 0;
    m.train_state = std::move(s);
  }
  if (!r.at_end()) throw FormatError("trailer", "unexpected bytes after the model");
  return m;
}

void save(const Model& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write(model, out);
}

Model load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("path", "cannot open " + path.string());
  return read(in);
}

}  // namespace smdn::model
