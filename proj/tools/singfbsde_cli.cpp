#include "singfbsde/cli/app.hpp"

int main(int argc, char** argv) {
    return singfbsde::cli::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
