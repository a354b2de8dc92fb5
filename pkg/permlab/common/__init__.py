# Cross-cutting helpers: errors, logging, random streams, settings
