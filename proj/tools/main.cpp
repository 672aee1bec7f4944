#include <string>
#include <vector>

#include "cli.hpp"

int main(int argc, char** argv) {
  return uep::cli::run(std::vector<std::string>(argv, argv + argc));
}
