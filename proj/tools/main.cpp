#include "tangled/commands.hpp"
#include "tangled/config.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace {

struct SubState {
  CLI::App* cmd = nullptr;
  std::string out_field;  // config field that --out is shorthand for
  std::string config_path;
  std::string out;
  std::map<std::string, std::string> values;  // per-field flag storage
  std::function<void(const tangled::RunConfig&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  using namespace tangled;

  CLI::App app{"synthetic video-text corpus, tangled-stream pre-training, and evaluation"};
  app.require_subcommand(1);

  std::vector<SubState> subs(4);
  auto setup = [&app](SubState& st, const char* name, const char* desc, const char* out_field,
                      void (*run)(const RunConfig&)) {
    st.cmd = app.add_subcommand(name, desc);
    st.out_field = out_field;
    st.run = run;
    // a repeated flag keeps its last value
    auto last = CLI::MultiOptionPolicy::TakeLast;
    st.cmd->add_option("--config", st.config_path, "key=value config file")
        ->multi_option_policy(last);
    st.cmd->add_option("--out", st.out, std::string("shorthand for --") + out_field)
        ->multi_option_policy(last);
    for (const ConfigField& f : config_fields())
      st.cmd->add_option("--" + f.name, st.values[f.name], f.help)->multi_option_policy(last);
  };
  setup(subs[0], "gen-data", "generate a paired synthetic corpus", "dataset", cmd_gen_data);
  setup(subs[1], "pretrain", "pre-train on a generated corpus", "checkpoint", cmd_pretrain);
  setup(subs[2], "eval-retrieval", "clip retrieval metrics on the val split", "report",
        cmd_eval_retrieval);
  setup(subs[3], "eval-localize", "action localization accuracy on the val split", "report",
        cmd_eval_localize);

  CLI11_PARSE(app, argc, argv);

  try {
    for (SubState& st : subs) {
      if (!st.cmd->parsed()) continue;
      RunConfig cfg;
      if (!st.config_path.empty()) cfg = load_run_config(st.config_path);
      if (st.cmd->count("--out") > 0) apply_override(cfg, st.out_field, st.out);
      for (const ConfigField& f : config_fields())
        if (st.cmd->count("--" + f.name) > 0) apply_override(cfg, f.name, st.values[f.name]);
      st.run(cfg);
      return 0;
    }
    std::fputs("error: no subcommand given\n", stderr);
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
