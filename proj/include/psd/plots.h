#ifndef PSD_PLOTS_H_
#define PSD_PLOTS_H_

#include <filesystem>
#include <string>
#include <vector>

#include "psd/evaluation.h"

namespace psd {

// Bar chart of dev accuracy per layer, chosen layer highlighted.
std::string LayerAccuracySvg(const std::string& preposition,
                             const std::vector<double>& accuracy, int chosen_layer);

// Heat map of the gold x predicted confusion counts.
std::string ConfusionSvg(const PrepositionReport& report);

// Writes <prep>.layers.svg and <prep>.confusion.svg per preposition plus
// macro.svg (per-preposition accuracy bars). Returns the written paths.
std::vector<std::filesystem::path> WritePlots(const EvaluationReport& report,
                                              const std::filesystem::path& dir);

}  // namespace psd

#endif  // PSD_PLOTS_H_
