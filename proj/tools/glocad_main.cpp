#include <string>
#include <vector>

#include "glocad/cli.hpp"

int main(int argc, char** argv) {
    return glocad::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
