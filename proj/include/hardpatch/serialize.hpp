#pragma once

#include "hardpatch/image.hpp"
#include "hardpatch/mask.hpp"
#include "hardpatch/survivability.hpp"
#include "json.hpp"

// ADL hooks so domain values drop into nlohmann::json directly. Grids are
// packed as one '0'/'1' string per row; float payloads round-trip exactly
// (float -> double -> shortest decimal -> double -> float is lossless).

namespace hardpatch {

void to_json(nlohmann::json& j, const Grid& g);
void from_json(const nlohmann::json& j, Grid& g);

void to_json(nlohmann::json& j, const Mask& m);
void from_json(const nlohmann::json& j, Mask& m);

void to_json(nlohmann::json& j, const Perturbation& d);
void from_json(const nlohmann::json& j, Perturbation& d);

void to_json(nlohmann::json& j, const Image& img);
void from_json(const nlohmann::json& j, Image& img);

void to_json(nlohmann::json& j, const SurvivabilityEstimate& e);
void from_json(const nlohmann::json& j, SurvivabilityEstimate& e);

}  // namespace hardpatch
