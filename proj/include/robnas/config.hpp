#pragma once

#include "robnas/adversary.hpp"
#include "robnas/netcore.hpp"
#include "robnas/objective.hpp"

#include <json.hpp>

#include <initializer_list>
#include <string>

namespace robnas::config {

using json = nlohmann::json;

// Rejects keys outside `allowed`; `where` names the section in the error.
void require_known_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where);

json to_json(const netcore::NetworkSpec& spec);
netcore::NetworkSpec spec_from_json(const json& j);

json to_json(const adversary::AdversaryConfig& cfg);
adversary::AdversaryConfig adversary_from_json(const json& j);

objective::TrainConfig train_from_json(const json& j);

}  // namespace robnas::config
