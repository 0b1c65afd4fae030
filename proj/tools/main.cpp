#include <iostream>
#include <string>
#include <vector>

#include <spdlog/cfg/env.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "hpmn/cli.hpp"

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("hpmn"));
  spdlog::cfg::load_env_levels();
  std::vector<std::string> args(argv + 1, argv + argc);
  return hpmn::cli::dispatch(args, std::cout, std::cerr);
}
