#pragma once

// Everything: models, dynamics, transcription, solver, refinement, mission and output.

#include <ascentry/benchmarks.hpp>
#include <ascentry/constraints_cost.hpp>
#include <ascentry/dynamics.hpp>
#include <ascentry/lgr.hpp>
#include <ascentry/mesh_refinement.hpp>
#include <ascentry/mission.hpp>
#include <ascentry/mission_config.hpp>
#include <ascentry/models.hpp>
#include <ascentry/nlp.hpp>
#include <ascentry/output.hpp>
#include <ascentry/qp.hpp>
#include <ascentry/sqp.hpp>
#include <ascentry/transcription.hpp>
