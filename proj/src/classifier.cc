#include "psd/classifier.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "psd/errors.h"
#include "psd/rng.h"

namespace psd {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// TrainConfig

json TrainConfig::ToJson() const {
  return {{"hidden_size", hidden_size}, {"learning_rate", learning_rate},
          {"beta1", beta1},             {"beta2", beta2},
          {"epsilon", epsilon},         {"batch_size", batch_size},
          {"max_epochs", max_epochs},   {"patience", patience},
          {"seed", seed}};
}

TrainConfig TrainConfig::FromJson(const json& j) {
  TrainConfig c;
  c.hidden_size = j.value("hidden_size", c.hidden_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.patience = j.value("patience", c.patience);
  c.seed = j.value("seed", c.seed);
  c.Validate();
  return c;
}

void TrainConfig::Validate() const {
  if (hidden_size <= 0 || batch_size <= 0 || max_epochs <= 0 || patience <= 0) {
    throw ValidationError("train config sizes must be positive");
  }
  if (!(learning_rate > 0.0) || !(beta1 >= 0.0 && beta1 < 1.0) ||
      !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0)) {
    throw ValidationError("train config optimizer settings out of range");
  }
}

// ---------------------------------------------------------------------------
// ClassifierModel

ClassifierModel::ClassifierModel(std::string preposition, MlpParams params,
                                 std::vector<SenseId> label_map,
                                 TrainConfig config)
    : preposition_(std::move(preposition)),
      params_(std::move(params)),
      label_map_(std::move(label_map)),
      config_(config) {
  if (label_map_.empty()) throw ValidationError("classifier with no senses");
  if (std::set<SenseId>(label_map_.begin(), label_map_.end()).size() !=
      label_map_.size()) {
    throw ValidationError("duplicate sense in label map");
  }
  if (!params_.ShapesConsistent() ||
      params_.num_senses() != static_cast<int>(label_map_.size())) {
    throw ValidationError("classifier parameter shapes are inconsistent");
  }
  if (!params_.AllFinite()) throw ValidationError("non-finite classifier parameters");
}

VectorF ClassifierModel::Probabilities(const VectorF& v) const {
  return Forward(params_, v);
}

size_t ClassifierModel::PredictIndex(const VectorF& v) const {
  const VectorF p = Probabilities(v);
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < p.size(); ++i) {
    if (p[i] > p[best]) best = i;
  }
  return static_cast<size_t>(best);
}

const SenseId& ClassifierModel::Predict(const VectorF& v) const {
  return label_map_[PredictIndex(v)];
}

std::vector<size_t> ClassifierModel::PredictBatch(const RowMatrixF& x) const {
  const MatrixT<float> p = ForwardBatch(params_, MatrixT<float>(x));
  std::vector<size_t> out(static_cast<size_t>(p.rows()));
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < p.cols(); ++c) {
      if (p(r, c) > p(r, best)) best = c;
    }
    out[static_cast<size_t>(r)] = static_cast<size_t>(best);
  }
  return out;
}

std::optional<size_t> ClassifierModel::IndexOf(const SenseId& sense) const {
  const auto it = std::find(label_map_.begin(), label_map_.end(), sense);
  if (it == label_map_.end()) return std::nullopt;
  return static_cast<size_t>(it - label_map_.begin());
}

// ---------------------------------------------------------------------------
// Training

namespace {

MlpParams InitParams(int d, int hidden, int senses, Rng& rng) {
  MlpParams p = MlpParams::Zero(d, hidden, senses);
  // Uniform fan-in scaling for weights and biases of each layer.
  auto fill = [&rng](auto& m, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      m.data()[i] = static_cast<float>(rng.Uniform(-bound, bound));
    }
  };
  fill(p.w1, d);
  fill(p.b1, d);
  fill(p.w2, hidden);
  fill(p.b2, hidden);
  return p;
}

class Adam {
 public:
  Adam(const MlpParams& shape, const TrainConfig& c)
      : m_(MlpParams::Zero(shape.input_dim(), shape.hidden_size(), shape.num_senses())),
        v_(m_),
        lr_(static_cast<float>(c.learning_rate)),
        b1_(static_cast<float>(c.beta1)),
        b2_(static_cast<float>(c.beta2)),
        eps_(static_cast<float>(c.epsilon)),
        cfg_b1_(c.beta1),
        cfg_b2_(c.beta2) {}

  void Step(MlpParams& p, const MlpParams& g) {
    ++t_;
    const auto c1 = static_cast<float>(1.0 - std::pow(cfg_b1_, t_));
    const auto c2 = static_cast<float>(1.0 - std::pow(cfg_b2_, t_));
    Update(p.w1, g.w1, m_.w1, v_.w1, c1, c2);
    Update(p.b1, g.b1, m_.b1, v_.b1, c1, c2);
    Update(p.w2, g.w2, m_.w2, v_.w2, c1, c2);
    Update(p.b2, g.b2, m_.b2, v_.b2, c1, c2);
  }

 private:
  template <typename M>
  void Update(M& param, const M& grad, M& m, M& v, float c1, float c2) {
    m = b1_ * m + (1.0f - b1_) * grad;
    v = b2_ * v + (1.0f - b2_) * grad.cwiseProduct(grad);
    param.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
  }

  MlpParams m_;
  MlpParams v_;
  float lr_, b1_, b2_, eps_;
  double cfg_b1_, cfg_b2_;
  int t_ = 0;
};

std::vector<SenseId> SortedSenses(const std::vector<SenseId>& labels) {
  std::set<SenseId> unique(labels.begin(), labels.end());
  return {unique.begin(), unique.end()};
}

}  // namespace

ClassifierModel TrainClassifier(const std::string& preposition,
                                const RowMatrixF& train_x,
                                const std::vector<SenseId>& train_y,
                                const RowMatrixF& dev_x,
                                const std::vector<SenseId>& dev_y,
                                const TrainConfig& config, TrainingLog* log) {
  config.Validate();
  if (train_x.rows() == 0) {
    throw ValidationError("no training instances for \"" + preposition + "\"");
  }
  if (static_cast<size_t>(train_x.rows()) != train_y.size() ||
      static_cast<size_t>(dev_x.rows()) != dev_y.size()) {
    throw ValidationError("feature rows and labels differ in count");
  }
  if (dev_x.rows() > 0 && dev_x.cols() != train_x.cols()) {
    throw ValidationError("train and dev vectors differ in dimension");
  }
  const int d = static_cast<int>(train_x.cols());
  std::vector<SenseId> labels = SortedSenses(train_y);
  const int k = static_cast<int>(labels.size());

  TrainingLog local_log;
  TrainingLog& out_log = log ? *log : local_log;
  out_log = {};

  if (k == 1) {
    return ClassifierModel(preposition, MlpParams::Zero(d, config.hidden_size, 1),
                           std::move(labels), config);
  }

  auto index_of = [&labels](const SenseId& s) -> int {
    const auto it = std::lower_bound(labels.begin(), labels.end(), s);
    return it != labels.end() && *it == s ? static_cast<int>(it - labels.begin()) : -1;
  };
  std::vector<int> gold(train_y.size());
  for (size_t i = 0; i < train_y.size(); ++i) gold[i] = index_of(train_y[i]);

  // Dev rows with a known sense drive early stopping.
  std::vector<Eigen::Index> dev_rows;
  std::vector<int> dev_gold;
  for (size_t i = 0; i < dev_y.size(); ++i) {
    if (const int g = index_of(dev_y[i]); g >= 0) {
      dev_rows.push_back(static_cast<Eigen::Index>(i));
      dev_gold.push_back(g);
    }
  }
  MatrixT<float> dev_known(static_cast<Eigen::Index>(dev_rows.size()), d);
  for (size_t i = 0; i < dev_rows.size(); ++i) {
    dev_known.row(static_cast<Eigen::Index>(i)) = dev_x.row(dev_rows[i]);
  }
  const bool early_stopping = !dev_rows.empty();

  Rng rng(config.seed);
  MlpParams params = InitParams(d, config.hidden_size, k, rng);
  Adam adam(params, config);
  MlpParams best = params;
  double best_dev = std::numeric_limits<double>::infinity();
  int since_best = 0;

  const auto n = static_cast<size_t>(train_x.rows());
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  MatrixT<float> batch_x;
  std::vector<int> batch_gold;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    rng.Shuffle(std::span<size_t>(order));
    double epoch_loss = 0.0;
    for (size_t start = 0; start < n; start += static_cast<size_t>(config.batch_size)) {
      const size_t stop = std::min(n, start + static_cast<size_t>(config.batch_size));
      batch_x.resize(static_cast<Eigen::Index>(stop - start), d);
      batch_gold.resize(stop - start);
      for (size_t i = start; i < stop; ++i) {
        batch_x.row(static_cast<Eigen::Index>(i - start)) =
            train_x.row(static_cast<Eigen::Index>(order[i]));
        batch_gold[i - start] = gold[order[i]];
      }
      const auto lg = ComputeGradient(params, batch_x, batch_gold);
      if (!std::isfinite(lg.loss) || !lg.grad.AllFinite()) {
        throw StageError("training \"" + preposition + "\" diverged at epoch " +
                         std::to_string(epoch) + " (batch starting at " +
                         std::to_string(start) + ", loss " +
                         std::to_string(lg.loss) + ", lr " +
                         std::to_string(config.learning_rate) + ")");
      }
      epoch_loss += lg.loss * static_cast<double>(stop - start);
      adam.Step(params, lg.grad);
    }
    out_log.train_loss.push_back(epoch_loss / static_cast<double>(n));

    if (!early_stopping) continue;
    const double dev_loss = CrossEntropy(ForwardBatch(params, dev_known), dev_gold);
    if (!std::isfinite(dev_loss)) {
      throw StageError("training \"" + preposition +
                       "\": non-finite dev loss at epoch " + std::to_string(epoch));
    }
    out_log.dev_loss.push_back(dev_loss);
    if (dev_loss < best_dev) {
      best_dev = dev_loss;
      best = params;
      out_log.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  if (!early_stopping) {
    best = params;
    out_log.best_epoch = static_cast<int>(out_log.train_loss.size());
  }
  return ClassifierModel(preposition, std::move(best), std::move(labels), config);
}

double Accuracy(const ClassifierModel& model, const RowMatrixF& x,
                const std::vector<SenseId>& y) {
  if (y.empty()) return 0.0;
  const auto pred = model.PredictBatch(x);
  size_t correct = 0;
  for (size_t i = 0; i < y.size(); ++i) {
    if (model.label_map()[pred[i]] == y[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(y.size());
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[4] = {'P', 'S', 'D', 'C'};
constexpr uint32_t kVersion = 1;

template <typename M>
void WriteBlock(std::ostream& out, const M& m) {
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(float)));
}

template <typename M>
void ReadBlock(std::istream& in, M& m, const fs::path& path) {
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(m.size() * sizeof(float)));
  if (!in) throw ValidationError("truncated checkpoint " + path.string());
}

std::string EscapeName(const std::string& prep) {
  std::string out;
  for (char c : prep) {
    out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' ? c : '_');
  }
  return out;
}

}  // namespace

void SaveCheckpoint(const ClassifierModel& model, const fs::path& path) {
  static_assert(std::endian::native == std::endian::little);
  json labels = json::array();
  for (const auto& s : model.label_map()) labels.push_back(s.raw());
  const json header = {{"preposition", model.preposition()},
                       {"label_map", labels},
                       {"chosen_layer", model.chosen_layer()},
                       {"encoder_fingerprint", model.encoder_fingerprint()},
                       {"d", model.params().input_dim()},
                       {"hidden_size", model.params().hidden_size()},
                       {"train_config", model.train_config().ToJson()},
                       {"seed", model.train_config().seed},
                       {"layer_accuracy", model.layer_accuracy()}};
  const std::string text = header.dump();
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StageError("cannot write " + path.string());
  out.write(kMagic, 4);
  out.write(reinterpret_cast<const char*>(&kVersion), sizeof(kVersion));
  const uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out << text;
  WriteBlock(out, model.params().w1);
  WriteBlock(out, model.params().b1);
  WriteBlock(out, model.params().w2);
  WriteBlock(out, model.params().b2);
  if (!out) throw StageError("short write to " + path.string());
}

ClassifierModel LoadCheckpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint " + path.string());
  char magic[4];
  uint32_t version = 0;
  uint64_t len = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || std::memcmp(magic, kMagic, 4) != 0 || version != kVersion) {
    throw ValidationError(path.string() + " is not a classifier checkpoint");
  }
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  json header;
  try {
    header = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError("bad checkpoint header in " + path.string() + ": " + e.what());
  }
  const int d = header.at("d").get<int>();
  const int hidden = header.at("hidden_size").get<int>();
  std::vector<SenseId> labels;
  for (const auto& s : header.at("label_map")) {
    labels.push_back(SenseId::Parse(s.get<std::string>()));
  }
  MlpParams p = MlpParams::Zero(d, hidden, static_cast<int>(labels.size()));
  ReadBlock(in, p.w1, path);
  ReadBlock(in, p.b1, path);
  ReadBlock(in, p.w2, path);
  ReadBlock(in, p.b2, path);
  ClassifierModel model(header.at("preposition").get<std::string>(), std::move(p),
                        std::move(labels),
                        TrainConfig::FromJson(header.at("train_config")));
  model.set_chosen_layer(header.at("chosen_layer").get<int>());
  model.set_encoder_fingerprint(header.at("encoder_fingerprint").get<std::string>());
  model.set_layer_accuracy(
      header.value("layer_accuracy", std::vector<double>{}));
  return model;
}

fs::path CheckpointPath(const fs::path& dir, const std::string& preposition) {
  return dir / (EscapeName(preposition) + ".ckpt");
}

void SaveModels(const std::map<std::string, ClassifierModel>& models,
                const fs::path& dir) {
  fs::create_directories(dir);
  for (const auto& [prep, model] : models) {
    SaveCheckpoint(model, CheckpointPath(dir, prep));
  }
}

std::map<std::string, ClassifierModel> LoadModels(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw ValidationError("model directory " + dir.string() + " does not exist");
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".ckpt") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::map<std::string, ClassifierModel> models;
  for (const auto& f : files) {
    auto model = LoadCheckpoint(f);
    const std::string prep = model.preposition();
    models.emplace(prep, std::move(model));
  }
  return models;
}

}  // namespace psd
