#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"

#include "galb/factory.hpp"

namespace galb {

/// Parses and validates an instance document. Every problem found (missing
/// field, wrong type, shape or invariant violation) is reported as one line of
/// the thrown InstanceError.
FactoryConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const FactoryConfig& config);

FactoryConfig load_instance(const std::filesystem::path& path);
void save_instance(const FactoryConfig& config, const std::filesystem::path& path);

/// The 3-workstation, 5-task, 2-resource reference line.
FactoryConfig reference_instance();

/// Seeded random line with two consumable resources and enough stock, buffer
/// room and horizon that running the tasks one after another always fits.
FactoryConfig synthetic_instance(int workstations, int tasks, std::uint64_t seed);

}  // namespace galb
