#include "replayforge/cli.hpp"

int main(int argc, char** argv) {
    return replayforge::cli::run_main(argc, argv);
}
