#include "hseg/cli.hpp"

int main(int argc, char** argv) {
    return hseg::run_cli(argc, argv);
}
