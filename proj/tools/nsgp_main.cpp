#include <string>
#include <vector>

#include "nsgp/cli.hpp"

int main(int argc, char** argv) {
  return nsgp::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
