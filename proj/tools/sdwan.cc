#include <iostream>
#include <string>
#include <vector>

#include "sdwan/cli.h"

int main(int argc, char** argv) {
  return sdwan::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
