#pragma once

#include "dcats/agent.hpp"
#include "dcats/anomaly.hpp"
#include "dcats/backend.hpp"
#include "dcats/config.hpp"
#include "dcats/error.hpp"
#include "dcats/forecast.hpp"
#include "dcats/io.hpp"
#include "dcats/metadata.hpp"
#include "dcats/neighbors.hpp"
#include "dcats/orchestrator.hpp"
#include "dcats/parallel.hpp"
#include "dcats/report.hpp"
#include "dcats/synthetic.hpp"
#include "dcats/templates.hpp"
#include "dcats/tsdata.hpp"
