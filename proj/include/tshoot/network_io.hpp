#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "tshoot/network.hpp"

namespace tshoot {

inline constexpr std::string_view kNetworkFormat = "tshoot-net/1";

// Parses a network document. Throws Error(parse_error) on malformed JSON or
// schema problems, unknown_variable for dangling references. The result is
// not validated; callers decide how to report violations.
Network parse_network(std::string_view document);
Network load_network(const std::filesystem::path& path);

// Emits a document that parse_network reads back into an equal network.
// Effects with an unexpanded combination are written through their
// interactions, not their derived CPT.
std::string write_network(const Network& net, int indent = 2);

}  // namespace tshoot
