// Regenerates the shipped cases/ artifacts from the study builders. Run
// after changing a builder; tests compare the shipped files against the
// builders byte-for-byte.
#include <filesystem>
#include <fstream>
#include <iostream>

#include "emtsim/netlist.hpp"
#include "emtsim/report.hpp"
#include "emtsim/studies.hpp"

int main(int argc, char** argv) {
  namespace fs = std::filesystem;
  const fs::path out_dir = argc > 1 ? argv[1] : "cases";
  fs::create_directories(out_dir);

  const emtsim::CaseDefinition defs[] = {
      emtsim::build_case1(), emtsim::build_case2(), emtsim::build_case3(),
      emtsim::build_case3(emtsim::Case3Order::BankEnergization)};
  for (const emtsim::CaseDefinition& def : defs) {
    {
      std::ofstream ckt(out_dir / (def.name + ".ckt"), std::ios::binary);
      ckt << emtsim::serialize_netlist(def.netlist);
    }
    {
      std::ofstream manifest(out_dir / (def.name + "_manifest.json"),
                             std::ios::binary);
      manifest << emtsim::render_manifest_json(def);
    }
    std::cout << "wrote " << (out_dir / def.name).string()
              << ".ckt and manifest\n";
  }
  return 0;
}
