// Copyright (c) 2026, The bayeslora authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <string>
#include <string_view>

#include "bayeslora/ensemble.hpp"
#include "bayeslora/laplace.hpp"
#include "bayeslora/model.hpp"

namespace bayeslora {

// Text checkpoints. Doubles are written in shortest round-trip form, so a save/load
// cycle reproduces every parameter bit for bit. The backbone is stored as its
// config and seed and regenerated on load; the fingerprint guards against drift.

std::string model_to_text(const LoraModel& model);
LoraModel model_from_text(std::string_view text);

std::string ensemble_to_text(const LoraEnsemble& ensemble);
LoraEnsemble ensemble_from_text(std::string_view text);

/// The MAP model plus every K-FAC factor (dense or low-rank, flagged) and λ.
struct PosteriorCheckpoint {
    LoraModel model;
    LaplacePosterior posterior;
};

std::string posterior_to_text(const LoraModel& map_model, const LaplacePosterior& posterior);
PosteriorCheckpoint posterior_from_text(std::string_view text);

void save_model(const LoraModel& model, const std::string& path);
LoraModel load_model(const std::string& path);
void save_ensemble(const LoraEnsemble& ensemble, const std::string& path);
LoraEnsemble load_ensemble(const std::string& path);
void save_posterior(const LoraModel& map_model, const LaplacePosterior& posterior, const std::string& path);
PosteriorCheckpoint load_posterior(const std::string& path);

/// "model", "ensemble" or "posterior", read from the checkpoint header.
std::string checkpoint_kind(std::string_view text);

}  // namespace bayeslora
