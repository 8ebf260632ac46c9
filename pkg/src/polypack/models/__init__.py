# Domain types: container geometry, configurations and stored records
