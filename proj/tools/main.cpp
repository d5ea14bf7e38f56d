#include <string>
#include <vector>

#include "bdab/cli.hpp"

int main(int argc, char** argv) {
  return bdab::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
