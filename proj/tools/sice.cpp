#include <string>
#include <vector>

#include "sice/cli.hpp"

int main(int argc, char** argv) {
    return sice::cli::main(std::vector<std::string>(argv, argv + argc));
}
