#include <string>
#include <vector>

#include "iasdet/harness.hpp"

int main(int argc, char** argv) {
    return iasdet::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
