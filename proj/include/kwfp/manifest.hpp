#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace kwfp {

std::string sha256_file(const std::filesystem::path& path);

// Every CLI run records what it read, what it wrote, and the exact
// configuration, so any result file can be regenerated.
struct Manifest {
    std::string subcommand;
    std::vector<std::string> argv;
    nlohmann::ordered_json config = nlohmann::ordered_json::object();

    void add_input(const std::filesystem::path& path);
    void add_output(const std::filesystem::path& path);
    void write(const std::filesystem::path& path) const;

private:
    nlohmann::ordered_json inputs_ = nlohmann::ordered_json::array();
    nlohmann::ordered_json outputs_ = nlohmann::ordered_json::array();
};

}  // namespace kwfp
