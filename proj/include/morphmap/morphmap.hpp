#pragma once

#include "morphmap/calibration.hpp"
#include "morphmap/config.hpp"
#include "morphmap/datastore.hpp"
#include "morphmap/error.hpp"
#include "morphmap/frs_simulator.hpp"
#include "morphmap/map_analysis.hpp"
#include "morphmap/pair_selection.hpp"
#include "morphmap/pipeline.hpp"
#include "morphmap/scoring.hpp"
#include "morphmap/stochastic_variation.hpp"
#include "morphmap/template_core.hpp"
