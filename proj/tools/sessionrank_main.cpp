#include <string>
#include <vector>

#include "sessionrank/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return sessionrank::run_cli(std::move(args));
}
