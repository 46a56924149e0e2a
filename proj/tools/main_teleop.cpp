#include "tool_main.hpp"

int main(int argc, char** argv) { return tool_main("teleop", argc, argv); }
