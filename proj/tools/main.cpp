#include "ailfm/harness.hpp"

int main(int argc, char** argv) { return ailfm::harness::cli(argc, argv); }
