#include <vector>
#include <string>

#include "deepi2i/cli.h"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return deepi2i::cli::run(args);
}
