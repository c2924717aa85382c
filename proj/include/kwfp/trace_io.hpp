#pragma once

#include <filesystem>
#include <string>

#include "kwfp/trace.hpp"

namespace kwfp {

// Canonical trace format: UTF-8, one JSON object per line,
//   {"meta":{"label","engine","browser","mode","capture_start_us",
//            "first_keystroke_us"?,"visit_index"},
//    "connections":[{"server_name"?,"port","pre_typing","packets":
//            [[ts_us,"+"|"-",size],...]},...]}
// Field names and order are normative; unknown fields are rejected.

std::string sample_to_json_line(const TraceSample& sample);
TraceSample sample_from_json_line(const std::string& line, size_t line_number);

Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

}  // namespace kwfp
