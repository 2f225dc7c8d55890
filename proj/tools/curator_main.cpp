#include <iostream>
#include <string>
#include <vector>

#include "curator/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return curator::cli::runCli(args, curator::cli::processEnv(), std::cout, std::cerr);
}
