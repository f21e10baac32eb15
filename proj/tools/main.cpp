#include "eegprompt/cli.hpp"

int main(int argc, char** argv) {
  return eegprompt::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
