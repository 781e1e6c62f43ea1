#pragma once

#include "tangled/config.hpp"

namespace tangled {

// The four subcommands. Each validates its inputs up front, prints a small
// tab-separated key-value report to stdout, and throws on failure; output
// files are written atomically, so failures leave nothing partial behind.
void cmd_gen_data(const RunConfig& cfg);
void cmd_pretrain(const RunConfig& cfg);
void cmd_eval_retrieval(const RunConfig& cfg);
void cmd_eval_localize(const RunConfig& cfg);

}  // namespace tangled
