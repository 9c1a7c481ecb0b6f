#include "psd/selection.h"

#include <atomic>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "psd/errors.h"

namespace psd {

namespace fs = std::filesystem;
using nlohmann::json;

json LayerChoice::ToJson() const {
  return {{"prep", preposition},
          {"chosen_layer", chosen_layer},
          {"dev_accuracy_per_layer", dev_accuracy_per_layer},
          {"seed", seed},
          {"best_epoch", best_epoch},
          {"num_layers", num_layers},
          {"encoder_fingerprint", encoder_fingerprint}};
}

LayerChoice LayerChoice::FromJson(const json& j) {
  LayerChoice c;
  try {
    c.preposition = j.at("prep").get<std::string>();
    c.chosen_layer = j.at("chosen_layer").get<int>();
    c.dev_accuracy_per_layer = j.at("dev_accuracy_per_layer").get<std::vector<double>>();
    c.seed = j.value("seed", uint64_t{0});
    c.best_epoch = j.value("best_epoch", 0);
    c.num_layers = j.value("num_layers", 0);
    c.encoder_fingerprint = j.value("encoder_fingerprint", std::string());
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad layer choice record: ") + e.what());
  }
  return c;
}

RowMatrixF LayerFeatures::AtLayer(int layer) const {
  if (matrices.empty()) return RowMatrixF(0, 0);
  const int d = matrices.front().dim();
  RowMatrixF x(static_cast<Eigen::Index>(matrices.size()), d);
  for (size_t i = 0; i < matrices.size(); ++i) {
    if (layer < 0 || layer >= matrices[i].num_rows()) {
      throw ValidationError("layer " + std::to_string(layer) + " outside matrix of " +
                            std::to_string(matrices[i].num_rows()) + " rows");
    }
    x.row(static_cast<Eigen::Index>(i)) = matrices[i].values.row(layer);
  }
  return x;
}

LayerFeatures LoadFeatures(const std::vector<const LabeledInstance*>& instances,
                           const CacheStore& cache, const std::string& fingerprint) {
  LayerFeatures out;
  std::vector<std::string> missing;
  for (const auto* inst : instances) {
    auto m = cache.Get(inst->id, fingerprint);
    if (!m) {
      missing.push_back(inst->id);
      continue;
    }
    out.matrices.push_back(std::move(*m));
    out.labels.push_back(inst->sense.value_or(SenseId()));
  }
  if (!missing.empty()) {
    throw StageError(std::to_string(missing.size()) +
                     " instances have no cached embeddings (first: " + missing.front() +
                     "); run embed first");
  }
  return out;
}

LayerChoice SelectLayer(const std::string& preposition, const LayerFeatures& train,
                        const LayerFeatures& dev, const TrainConfig& config) {
  if (train.size() == 0) {
    throw ValidationError("no training data for \"" + preposition + "\"");
  }
  LayerChoice choice;
  choice.preposition = preposition;
  choice.seed = config.seed;
  choice.num_layers = train.matrices.front().num_rows() - 1;
  choice.encoder_fingerprint = train.matrices.front().encoder_fingerprint;
  if (dev.size() == 0) {
    std::cerr << "warning: \"" << preposition
              << "\" has no dev instances; using the last layer\n";
    choice.chosen_layer = choice.num_layers;
    TrainingLog log;
    TrainClassifier(preposition, train.AtLayer(choice.chosen_layer), train.labels,
                    RowMatrixF(0, train.matrices.front().dim()), {}, config, &log);
    choice.best_epoch = log.best_epoch;
    return choice;
  }
  double best = -1.0;
  for (int layer = 0; layer <= choice.num_layers; ++layer) {
    TrainingLog log;
    const auto model = TrainClassifier(preposition, train.AtLayer(layer), train.labels,
                                       dev.AtLayer(layer), dev.labels, config, &log);
    const double acc = Accuracy(model, dev.AtLayer(layer), dev.labels);
    choice.dev_accuracy_per_layer.push_back(acc);
    if (acc > best) {
      best = acc;
      choice.chosen_layer = layer;
      choice.best_epoch = log.best_epoch;
    }
  }
  return choice;
}

ClassifierModel TrainFinalModel(const LayerChoice& choice, const LayerFeatures& train,
                                const LayerFeatures& dev, const TrainConfig& config,
                                bool retrain_on_dev) {
  const int layer = choice.chosen_layer;
  const int d = train.matrices.front().dim();
  ClassifierModel model = [&] {
    if (retrain_on_dev && dev.size() > 0) {
      RowMatrixF x(static_cast<Eigen::Index>(train.size() + dev.size()), d);
      x << train.AtLayer(layer), dev.AtLayer(layer);
      std::vector<SenseId> y = train.labels;
      y.insert(y.end(), dev.labels.begin(), dev.labels.end());
      TrainConfig fixed = config;
      fixed.max_epochs = std::max(1, choice.best_epoch);
      return TrainClassifier(choice.preposition, x, y, RowMatrixF(0, d), {}, fixed);
    }
    return TrainClassifier(choice.preposition, train.AtLayer(layer), train.labels,
                           dev.size() > 0 ? dev.AtLayer(layer) : RowMatrixF(0, d),
                           dev.labels, config);
  }();
  model.set_chosen_layer(layer);
  model.set_encoder_fingerprint(train.matrices.front().encoder_fingerprint);
  model.set_layer_accuracy(choice.dev_accuracy_per_layer);
  return model;
}

void ParallelFor(size_t n, int jobs, const std::function<void(size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::jthread> workers;
  const size_t count = std::min(n, static_cast<size_t>(jobs));
  for (size_t w = 0; w < count; ++w) {
    workers.emplace_back([&] {
      for (size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  workers.clear();
  if (error) std::rethrow_exception(error);
}

std::vector<LayerChoice> SelectAllLayers(const Dataset& dataset, const CacheStore& cache,
                                         const std::string& fingerprint,
                                         const SweepOptions& options) {
  std::vector<std::string> preps;
  for (const auto& p : dataset.Prepositions()) {
    if (!dataset.Select(p, Split::kTrain).empty()) preps.push_back(p);
  }
  std::vector<LayerChoice> choices(preps.size());
  ParallelFor(preps.size(), options.jobs, [&](size_t i) {
    const auto train = LoadFeatures(dataset.Select(preps[i], Split::kTrain), cache, fingerprint);
    const auto dev = LoadFeatures(dataset.Select(preps[i], Split::kDev), cache, fingerprint);
    choices[i] = SelectLayer(preps[i], train, dev, options.config);
    if (options.verbose) {
      std::cerr << "select-layers: " << preps[i] << " -> layer "
                << choices[i].chosen_layer << '\n';
    }
  });
  return choices;
}

std::map<std::string, ClassifierModel> TrainAllModels(
    const Dataset& dataset, const CacheStore& cache,
    const std::vector<LayerChoice>& choices, const SweepOptions& options) {
  std::vector<ClassifierModel> models(choices.size());
  ParallelFor(choices.size(), options.jobs, [&](size_t i) {
    const auto& c = choices[i];
    const auto train =
        LoadFeatures(dataset.Select(c.preposition, Split::kTrain), cache, c.encoder_fingerprint);
    const auto dev =
        LoadFeatures(dataset.Select(c.preposition, Split::kDev), cache, c.encoder_fingerprint);
    if (train.size() == 0) {
      throw ValidationError("no training data for \"" + c.preposition + "\"");
    }
    models[i] = TrainFinalModel(c, train, dev, options.config, options.retrain_on_dev);
  });
  std::map<std::string, ClassifierModel> out;
  for (auto& m : models) {
    const std::string prep = m.preposition();
    out.emplace(prep, std::move(m));
  }
  return out;
}

void WriteChoices(const std::vector<LayerChoice>& choices, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw StageError("cannot write " + path.string());
  for (const auto& c : choices) out << c.ToJson().dump() << '\n';
}

std::vector<LayerChoice> ReadChoices(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::vector<LayerChoice> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(LayerChoice::FromJson(json::parse(line)));
  }
  return out;
}

}  // namespace psd
