#include "app.hpp"

#include <string>
#include <vector>

int main(int argc, char** argv) {
  return lawsde::app::run(std::vector<std::string>(argv, argv + argc));
}
