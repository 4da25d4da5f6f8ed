// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "config.hpp"

namespace svcdiff::cli {

// Paths and resolved configuration for one subcommand invocation.
struct Invocation {
  std::string command;
  std::vector<std::string> args;  // argv after the program name
  RunConfig config;
  std::filesystem::path out;
  std::filesystem::path input;       // --in (slice: directory, convert/bench: WAV)
  std::filesystem::path manifest;    // --manifest (featurize)
  std::filesystem::path features;    // --features (train/distill/slim)
  std::filesystem::path checkpoint;  // --checkpoint
  std::filesystem::path students;    // --students (bench)
};

// A command that ran but could not finish every item. Partial outputs and
// the run manifest are already written when this is thrown.
class PartialFailure : public std::runtime_error {
 public:
  PartialFailure(const std::string& what, std::vector<std::string> failed)
      : std::runtime_error(what), failed_(std::move(failed)) {}
  const std::vector<std::string>& failed() const noexcept { return failed_; }

 private:
  std::vector<std::string> failed_;
};

// Config sections each subcommand reads; drives --help.
std::vector<std::string> sections_for(const std::string& command);

void cmd_slice(const Invocation& inv);
void cmd_featurize(const Invocation& inv);
void cmd_train(const Invocation& inv);
void cmd_distill(const Invocation& inv);
void cmd_slim(const Invocation& inv);
void cmd_convert(const Invocation& inv);
void cmd_bench(const Invocation& inv);

// Minimal RFC 4180 reading/writing for the manifests.
std::string csv_field(const std::string& s);
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path);

}  // namespace svcdiff::cli
