#include <string>
#include <vector>

#include "rrm/cli.hpp"

int main(int argc, char** argv) {
  return rrm::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
