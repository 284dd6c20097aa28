#include <string>
#include <vector>

#include "cavmem/cli.hpp"

int main(int argc, char** argv) {
    return cavmem::run_cli(std::vector<std::string>(argv, argv + argc));
}
