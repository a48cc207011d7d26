#pragma once

// Umbrella header.

#include "thermonet/error.hpp"
#include "thermonet/fit.hpp"
#include "thermonet/hydraulics.hpp"
#include "thermonet/io/format.hpp"
#include "thermonet/io/network_file.hpp"
#include "thermonet/io/results_file.hpp"
#include "thermonet/io/rom_file.hpp"
#include "thermonet/io/scenario_file.hpp"
#include "thermonet/lyapunov.hpp"
#include "thermonet/mor.hpp"
#include "thermonet/network.hpp"
#include "thermonet/simulation.hpp"
#include "thermonet/thermal_fom.hpp"
#include "thermonet/types.hpp"
