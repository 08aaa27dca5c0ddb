#pragma once

#include "optcon/analysis.hpp"
#include "optcon/controller.hpp"
#include "optcon/costs.hpp"
#include "optcon/graph.hpp"
#include "optcon/plant.hpp"
#include "optcon/scenario_io.hpp"
#include "optcon/sim.hpp"
