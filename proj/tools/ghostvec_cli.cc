// Copyright (c) 2026 The GhostVec Lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "ghostvec/matrix_io.h"
#include "ghostvec/pipeline.h"
#include "json.hpp"

namespace {

using ghostvec::Pipeline;
using ghostvec::PipelineConfig;

struct CommonFlags {
  std::string config;
  std::string out;
  uint64_t seed = 0;
  bool seed_set = false;
  bool force = false;
};

void emit_error(const std::string& kind, const std::string& stage, const std::string& msg) {
  nlohmann::ordered_json j;
  j["error"] = kind;
  j["stage"] = stage;
  j["message"] = msg;
  std::cerr << j.dump() << '\n';
}

PipelineConfig resolve_config(const CommonFlags& f) {
  PipelineConfig cfg = f.config.empty() ? PipelineConfig::parse("", "<defaults>") : PipelineConfig::load(f.config);
  if (f.seed_set) cfg.apply_seed(f.seed);
  if (const char* env = std::getenv("GHOSTVEC_OUT"); env && *env) cfg.out = env;
  if (!f.out.empty()) cfg.out = f.out;
  return cfg;
}

int run_synth_jobs(const std::string& jobs_path, const std::string& voice_map_path,
                   const std::string& dest, const PipelineConfig& cfg) {
  const auto map = ghostvec::VoiceMap::load(voice_map_path);
  for (const auto& job : ghostvec::load_synth_jobs(jobs_path)) {
    const ghostvec::Matrix e = ghostvec::load_matrix(job.embedding_path);
    if (e.rows() != 1 && e.cols() != 1)
      throw ghostvec::ShapeError(job.embedding_path + ": embedding must be a single row or column");
    const ghostvec::Vector x = e.reshaped();
    const auto mel = ghostvec::synth_mel(map, {" " + job.text + " ", x}, cfg.synth);
    ghostvec::save_matrix(dest + "/" + job.utt_id + ".mel.gvm", mel);
    ghostvec::write_wav(dest + "/" + job.utt_id + ".wav", ghostvec::vocode(mel, cfg.synth));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GhostVec desk-scale pipeline"};
  app.require_subcommand(1);
  CommonFlags flags;
  std::string jobs, voice_map, dest;

  std::vector<std::string> commands = ghostvec::stage_names();
  commands.push_back("all");
  for (const auto& name : commands) {
    auto* sub = app.add_subcommand(name, name == "all" ? "run every stage in order" : "run the " + name + " stage");
    sub->add_option("--config", flags.config, "flat key = value config file");
    sub->add_option("--out", flags.out, "output directory (overrides GHOSTVEC_OUT and the config)");
    sub->add_option_function<uint64_t>(
        "--seed", [&](const uint64_t& s) { flags.seed = s, flags.seed_set = true; }, "global seed override");
    sub->add_flag("--force", flags.force, "rerun even when the ledger says the stage is up to date");
    if (name == "synth") {
      sub->add_option("--jobs", jobs, "standalone mode: TSV of utt_id, text, embedding file");
      sub->add_option("--voice-map", voice_map, "voice map for --jobs (default: <out>/synth/voice_map.txt)");
      sub->add_option("--dest", dest, "destination directory for --jobs output");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    emit_error("usage", "", e.what());
    return 3;
  }

  const std::string stage = app.get_subcommands().front()->get_name();
  try {
    const PipelineConfig cfg = resolve_config(flags);
    if (stage == "synth" && !jobs.empty()) {
      if (dest.empty()) throw ghostvec::ConfigError("synth --jobs needs --dest");
      return run_synth_jobs(jobs, voice_map.empty() ? cfg.out + "/synth/voice_map.txt" : voice_map, dest, cfg);
    }
    Pipeline p(cfg, [](const std::string& m) { std::cerr << m << std::endl; });
    if (stage == "all")
      p.run_all(flags.force);
    else
      p.run(stage, flags.force);
    return 0;
  } catch (const ghostvec::MissingPrerequisiteError& e) {
    emit_error(e.kind(), stage, e.what());
    return 2;
  } catch (const ghostvec::ConfigError& e) {
    emit_error(e.kind(), stage, e.what());
    return 3;
  } catch (const ghostvec::Error& e) {
    emit_error(e.kind(), stage, e.what());
    return 1;
  } catch (const std::exception& e) {
    emit_error("internal", stage, e.what());
    return 1;
  }
}
