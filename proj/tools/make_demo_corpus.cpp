// Copyright 2026 The isotrace Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Writes synthetic demo datasets built from a lexicon's head words.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "isotrace/error.hpp"
#include "isotrace/lexicon.hpp"
#include "isotrace/synthetic.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

void write_jsonl(const fs::path& path, const std::vector<isotrace::DataEntry>& entries) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const isotrace::DataEntry& e : entries) {
    nlohmann::json j = {{"id", e.id}, {"text", e.text}};
    if (e.label) j["label"] = std::string(isotrace::to_string(*e.label));
    out << j.dump() << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate synthetic member, non-member, control and background datasets"};
  std::string lexicon_path = "data/lexicon.jsonl";
  std::string out_dir = "data/demo";
  std::uint64_t seed = 1;
  std::size_t members = 40;
  std::size_t nonmembers = 40;
  std::size_t control = 40;
  std::size_t background = 200;
  app.add_option("--lexicon", lexicon_path, "Synonym lexicon (JSONL)");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--seed", seed, "Generator seed");
  app.add_option("--members", members, "Member entries");
  app.add_option("--nonmembers", nonmembers, "Non-member entries");
  app.add_option("--control", control, "Control (known non-training) entries");
  app.add_option("--background", background, "Background corpus entries");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    const isotrace::Lexicon lexicon = isotrace::Lexicon::load(lexicon_path);
    fs::create_directories(out_dir);
    auto make = [&](std::size_t n, const char* prefix, std::uint64_t stream,
                    std::optional<isotrace::Membership> label) {
      isotrace::SyntheticCorpusOptions opt;
      opt.entries = n;
      opt.seed = seed * 1000003 + stream;
      opt.id_prefix = prefix;
      return isotrace::synthetic_entries(lexicon, opt, label);
    };
    using isotrace::Membership;
    auto m = make(members, "mem", 1, Membership::kMember);
    auto n = make(nonmembers, "non", 2, Membership::kNonMember);
    write_jsonl(fs::path(out_dir) / "members.jsonl", m);
    write_jsonl(fs::path(out_dir) / "nonmembers.jsonl", n);
    std::vector<isotrace::DataEntry> mixed = m;
    mixed.insert(mixed.end(), n.begin(), n.end());
    write_jsonl(fs::path(out_dir) / "mixed.jsonl", mixed);
    write_jsonl(fs::path(out_dir) / "control.jsonl", make(control, "ctl", 3, Membership::kNonMember));
    write_jsonl(fs::path(out_dir) / "background.jsonl", make(background, "bg", 4, std::nullopt));
    std::cout << "wrote demo datasets to " << out_dir << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
