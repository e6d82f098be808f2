// SPDX-License-Identifier: Apache-2.0
#include "molrefine/element.hpp"

#include <array>

namespace molrefine {
namespace {

// Symbol, conventional atomic weight, outer-shell electron count; index = Z - 1.
constexpr std::array<ElementInfo, kMaxElement> kElements = {{
    {"H", 1.0080, 1},
    {"He", 4.0030, 2},
    {"Li", 6.9410, 1},
    {"Be", 9.0120, 2},
    {"B", 10.8120, 3},
    {"C", 12.0110, 4},
    {"N", 14.0070, 5},
    {"O", 15.9990, 6},
    {"F", 18.9980, 7},
    {"Ne", 20.1800, 8},
    {"Na", 22.9900, 1},
    {"Mg", 24.3050, 2},
    {"Al", 26.9820, 3},
    {"Si", 28.0860, 4},
    {"P", 30.9740, 5},
    {"S", 32.0670, 6},
    {"Cl", 35.4530, 7},
    {"Ar", 39.9480, 8},
    {"K", 39.0980, 1},
    {"Ca", 40.0780, 2},
    {"Sc", 44.9560, 3},
    {"Ti", 47.8670, 4},
    {"V", 50.9440, 5},
    {"Cr", 51.9960, 6},
    {"Mn", 54.9380, 7},
    {"Fe", 55.8450, 8},
    {"Co", 58.9330, 9},
    {"Ni", 58.6930, 10},
    {"Cu", 63.5460, 11},
    {"Zn", 65.3900, 2},
    {"Ga", 69.7230, 3},
    {"Ge", 72.6100, 4},
    {"As", 74.9220, 5},
    {"Se", 78.9600, 6},
    {"Br", 79.9040, 7},
    {"Kr", 83.8000, 8},
    {"Rb", 85.4680, 1},
    {"Sr", 87.6200, 2},
    {"Y", 88.9060, 3},
    {"Zr", 91.2240, 4},
    {"Nb", 92.9060, 5},
    {"Mo", 95.9400, 6},
    {"Tc", 98.0000, 7},
    {"Ru", 101.0700, 8},
    {"Rh", 102.9060, 9},
    {"Pd", 106.4200, 10},
    {"Ag", 107.8680, 11},
    {"Cd", 112.4120, 2},
    {"In", 114.8180, 3},
    {"Sn", 118.7110, 4},
    {"Sb", 121.7600, 5},
    {"Te", 127.6000, 6},
    {"I", 126.9040, 7},
    {"Xe", 131.2900, 8},
    {"Cs", 132.9050, 1},
    {"Ba", 137.3280, 2},
    {"La", 138.9060, 3},
    {"Ce", 140.1160, 4},
    {"Pr", 140.9080, 3},
    {"Nd", 144.2400, 4},
    {"Pm", 145.0000, 5},
    {"Sm", 150.3600, 6},
    {"Eu", 151.9640, 7},
    {"Gd", 157.2500, 8},
    {"Tb", 158.9250, 9},
    {"Dy", 162.5000, 10},
    {"Ho", 164.9300, 11},
    {"Er", 167.2600, 12},
    {"Tm", 168.9340, 13},
    {"Yb", 173.0400, 14},
    {"Lu", 174.9670, 15},
    {"Hf", 178.4900, 4},
    {"Ta", 180.9480, 5},
    {"W", 183.8400, 6},
    {"Re", 186.2070, 7},
    {"Os", 190.2300, 8},
    {"Ir", 192.2170, 9},
    {"Pt", 195.0780, 10},
    {"Au", 196.9670, 11},
    {"Hg", 200.5900, 2},
    {"Tl", 204.3830, 3},
    {"Pb", 207.2000, 4},
    {"Bi", 208.9800, 5},
    {"Po", 209.0000, 6},
    {"At", 210.0000, 7},
    {"Rn", 222.0000, 8},
    {"Fr", 223.0000, 1},
    {"Ra", 226.0000, 2},
    {"Ac", 227.0000, 3},
    {"Th", 232.0380, 4},
    {"Pa", 231.0360, 3},
    {"U", 238.0290, 4},
    {"Np", 237.0000, 5},
    {"Pu", 244.0000, 6},
    {"Am", 243.0000, 7},
    {"Cm", 247.0000, 8},
    {"Bk", 247.0000, 9},
    {"Cf", 251.0000, 10},
    {"Es", 252.0000, 11},
    {"Fm", 257.0000, 12},
    {"Md", 258.0000, 13},
    {"No", 259.0000, 14},
    {"Lr", 262.0000, 15},
    {"Rf", 267.0000, 2},
    {"Db", 268.0000, 2},
    {"Sg", 269.0000, 2},
    {"Bh", 270.0000, 2},
    {"Hs", 269.0000, 2},
    {"Mt", 278.0000, 2},
    {"Ds", 281.0000, 2},
    {"Rg", 281.0000, 2},
    {"Cn", 285.0000, 2},
    {"Nh", 284.0000, 2},
    {"Fl", 289.0000, 2},
    {"Mc", 288.0000, 2},
    {"Lv", 293.0000, 2},
    {"Ts", 292.0000, 2},
    {"Og", 294.0000, 2},
}};

}  // namespace

const ElementInfo& element_info(int atomic_number) {
  return kElements.at(static_cast<std::size_t>(atomic_number - 1));
}

std::optional<int> element_from_symbol(std::string_view symbol) {
  for (std::size_t i = 0; i < kElements.size(); ++i) {
    if (kElements[i].symbol == symbol) return static_cast<int>(i + 1);
  }
  return std::nullopt;
}

std::span<const int> organic_valences(int atomic_number) {
  static constexpr int kB[] = {3};
  static constexpr int kC[] = {4};
  static constexpr int kN[] = {3, 5};
  static constexpr int kO[] = {2};
  static constexpr int kP[] = {3, 5};
  static constexpr int kS[] = {2, 4, 6};
  static constexpr int kHalogen[] = {1};
  switch (atomic_number) {
    case 5: return kB;
    case 6: return kC;
    case 7: return kN;
    case 8: return kO;
    case 15: return kP;
    case 16: return kS;
    case 9:
    case 17:
    case 35:
    case 53: return kHalogen;
    default: return {};
  }
}

bool is_organic_subset(int atomic_number) { return !organic_valences(atomic_number).empty(); }

std::vector<int> allowed_valences(int atomic_number, int charge) {
  std::vector<int> out;
  const auto base = organic_valences(atomic_number);
  if (base.empty()) return out;
  for (int v : base) {
    int shifted = v;
    if (atomic_number == 6) {
      shifted = v - (charge < 0 ? -charge : charge);
    } else if (atomic_number == 5) {
      shifted = v - charge;
    } else {
      shifted = v + charge;
    }
    if (shifted >= 0 && (out.empty() || out.back() != shifted)) out.push_back(shifted);
  }
  if (out.empty()) out.push_back(0);
  return out;
}

}  // namespace molrefine
