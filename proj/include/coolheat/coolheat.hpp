#pragma once

#include "coolheat/analysis.hpp"
#include "coolheat/atomic_structure.hpp"
#include "coolheat/commands.hpp"
#include "coolheat/dynamics.hpp"
#include "coolheat/experiment.hpp"
#include "coolheat/io.hpp"
#include "coolheat/radiation.hpp"
#include "coolheat/rate_model.hpp"
#include "coolheat/scenario_io.hpp"
#include "coolheat/species_io.hpp"
